"""
Speed-to-accuracy and relative speed-up.

s(f, a) is the first evaluated iteration whose accuracy reaches a. L_r compares
how long the scratch model needs to reach a_scratch with how long f needs to
reach r% of it. An unreached target is None and propagates through every
derived quantity.
"""

from __future__ import annotations

from dataclasses import dataclass

from sunkcost.models.records import RunRecord
from sunkcost.models.specs import TargetMode


class MetricsError(ValueError):
    """Raised for malformed curves or incompatible records."""

    pass


@dataclass(frozen=True)
class LearningCurve:
    iterations: tuple[int, ...]
    accuracies: tuple[float, ...]

    def __post_init__(self):
        if not self.iterations:
            raise MetricsError("a learning curve needs at least one evaluation")
        if len(self.iterations) != len(self.accuracies):
            raise MetricsError("iterations and accuracies must be parallel")
        if any(a >= b for a, b in zip(self.iterations, self.iterations[1:], strict=False)):
            raise MetricsError("curve iterations must be strictly increasing")
        if any(not 0.0 <= a <= 1.0 for a in self.accuracies):
            raise MetricsError("curve accuracies must lie in [0, 1]")

    @classmethod
    def from_pairs(cls, pairs: list[tuple[int, float]]) -> LearningCurve:
        return cls(tuple(int(t) for t, _ in pairs), tuple(float(a) for _, a in pairs))

    @classmethod
    def from_record(cls, record: RunRecord) -> LearningCurve:
        return cls(tuple(record.eval_iterations), tuple(record.test_accuracy))

    @property
    def max_accuracy(self) -> float:
        return max(self.accuracies)

    @property
    def final_accuracy(self) -> float:
        return self.accuracies[-1]


def speed(curve: LearningCurve, target: float) -> int | None:
    """Smallest recorded iteration with accuracy >= target; None when never reached."""
    if not 0.0 <= target <= 1.0:
        raise MetricsError(f"accuracy target must lie in [0, 1], got {target}")
    for iteration, accuracy in zip(curve.iterations, curve.accuracies, strict=True):
        if accuracy >= target:
            return iteration
    return None


def scratch_target(curve: LearningCurve, mode: TargetMode) -> float:
    """a_scratch: final evaluated accuracy, or the curve maximum."""
    return curve.max_accuracy if mode == TargetMode.MAX else curve.final_accuracy


def relative_speedup(
    curve: LearningCurve, scratch: LearningCurve, a_scratch: float, r: float
) -> float | None:
    """L_r = s(scratch, a_scratch) / s(f, r/100 * a_scratch)."""
    if not 0.0 < r <= 100.0:
        raise MetricsError(f"r must lie in (0, 100], got {r}")
    numerator = speed(scratch, a_scratch)
    denominator = speed(curve, r / 100.0 * a_scratch)
    if not numerator or not denominator:
        # unreached, or reached by the untrained model at iteration 0
        return None
    return numerator / denominator
