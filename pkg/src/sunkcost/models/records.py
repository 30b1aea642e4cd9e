# models/records.py
from __future__ import annotations

import csv
import io
from enum import Enum
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator

from sunkcost.models.specs import TargetMode

# ---------- Run records ----------


class RunStatus(str, Enum):
    COMPLETED = "completed"
    DIVERGED = "diverged"


CSV_COLUMNS = ["iteration", "test_accuracy", "train_loss", "grad_norm_old", "grad_norm_new"]


def _strictly_increasing(values: list[int]) -> bool:
    return all(a < b for a, b in zip(values, values[1:], strict=False))


def _in_unit_interval(values: list[float | None]) -> bool:
    return all(v is None or 0.0 <= v <= 1.0 for v in values)


def _cell(value: float | int | None) -> str:
    return "" if value is None else repr(value)


class RunRecord(BaseModel):
    """
    Outcome of one training run: curves as parallel arrays.

    Accuracy curves are indexed by `eval_iterations` (the first evaluation after
    training starts, then every `eval_every` iterations and the last one); the
    initial model's accuracies are kept separately. Gradient norms are indexed by
    `grad_iterations`, which begins at iteration 0. `train_loss[i]` is the batch
    loss of iteration i + 1.
    """

    model_config = ConfigDict(extra="forbid")

    schema_version: Literal["run_record.v1"] = "run_record.v1"
    arm: str
    seed: int
    fingerprint: str = Field(description="SHA-256 over the training plan and the data.")
    components: dict[str, str] = Field(
        default_factory=dict, description="Aspect flags of the arm (start/init/reg/data/sched)."
    )
    config: dict[str, Any] = Field(default_factory=dict, description="Serialized TrainingPlan.")
    status: RunStatus = RunStatus.COMPLETED
    diagnostic: str | None = None

    iterations: int = Field(description="Planned optimizer steps.")
    iterations_completed: int
    eval_every: int

    initial_accuracy: float
    initial_accuracy_old: float | None = None
    initial_accuracy_new: float | None = None

    eval_iterations: list[int]
    test_accuracy: list[float]
    test_accuracy_old: list[float | None]
    test_accuracy_new: list[float | None]
    train_loss: list[float]

    grad_iterations: list[int]
    grad_norm_old: list[float | None]
    grad_norm_new: list[float | None]

    learning_speed_epochs: int = Field(
        default=0, description="Epochs of correctness recorded for learning speeds."
    )
    wall_clock_s: float = Field(default=0.0, exclude=True, description="Not persisted.")

    @model_validator(mode="after")
    def _check_curves(self) -> RunRecord:
        n = len(self.eval_iterations)
        if not (len(self.test_accuracy) == len(self.test_accuracy_old)
                == len(self.test_accuracy_new) == n):
            raise ValueError("accuracy curves must be parallel to eval_iterations")
        if not len(self.grad_norm_old) == len(self.grad_norm_new) == len(self.grad_iterations):
            raise ValueError("gradient-norm curves must be parallel to grad_iterations")
        if not _strictly_increasing(self.eval_iterations):
            raise ValueError("eval_iterations must be strictly increasing")
        if not _strictly_increasing(self.grad_iterations):
            raise ValueError("grad_iterations must be strictly increasing")
        accuracies = [self.initial_accuracy, self.initial_accuracy_old, self.initial_accuracy_new]
        for curve in (self.test_accuracy, self.test_accuracy_old, self.test_accuracy_new):
            accuracies.extend(curve)
        if not _in_unit_interval(accuracies):
            raise ValueError("accuracies must lie in [0, 1]")
        if len(self.train_loss) != self.iterations_completed:
            raise ValueError("train_loss needs one entry per completed iteration")
        if self.iterations_completed > self.iterations:
            raise ValueError("iterations_completed exceeds the planned iterations")
        return self

    @property
    def final_accuracy(self) -> float | None:
        return self.test_accuracy[-1] if self.test_accuracy else None

    def csv_rows(self) -> list[list[str]]:
        accuracy = dict(zip(self.eval_iterations, self.test_accuracy, strict=True))
        accuracy.setdefault(0, self.initial_accuracy)
        grads = {
            t: (old, new)
            for t, old, new in zip(
                self.grad_iterations, self.grad_norm_old, self.grad_norm_new, strict=True
            )
        }
        rows = []
        for t in range(self.iterations_completed + 1):
            loss = self.train_loss[t - 1] if t > 0 else None
            old, new = grads.get(t, (None, None))
            rows.append([str(t), _cell(accuracy.get(t)), _cell(loss), _cell(old), _cell(new)])
        return rows

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        writer.writerows(self.csv_rows())
        return buffer.getvalue()

    def to_json(self) -> str:
        return self.model_dump_json(indent=2) + "\n"

    @classmethod
    def from_path(cls, path: Path) -> RunRecord:
        return cls.model_validate_json(path.read_text(encoding="utf-8"))


# ---------- Speed reports ----------


class ArmSummary(BaseModel):
    """Seed-mean curve and report-row metrics of one arm."""

    model_config = ConfigDict(extra="forbid")

    arm: str
    seeds: list[int]
    components: dict[str, str] = Field(default_factory=dict)
    diverged_seeds: list[int] = Field(default_factory=list)
    eval_iterations: list[int] = Field(default_factory=list)
    mean_accuracy: list[float] = Field(default_factory=list)
    se_accuracy: list[float] = Field(default_factory=list)
    max_accuracy: float | None = None
    max_accuracy_se: float | None = None
    final_accuracy: float | None = None
    speeds: dict[str, int | None] = Field(
        default_factory=dict, description="r -> s(f, r/100 * a_scratch); null = unreached."
    )
    speedups: dict[str, float | None] = Field(
        default_factory=dict, description="r -> L_r; null = unreached."
    )


class SpeedReport(BaseModel):
    model_config = ConfigDict(extra="forbid")

    schema_version: Literal["speed_report.v1"] = "speed_report.v1"
    baseline_arm: str
    target_mode: TargetMode
    a_scratch: float
    scratch_speed: int | None = Field(description="s(scratch, a_scratch).")
    r_values: list[float]
    eval_resolution: int = Field(description="Eval cadence k; s(f, a) is exact to k iterations.")
    arms: list[ArmSummary]
    notes: list[str] = Field(default_factory=list)

    def arm(self, name: str) -> ArmSummary:
        for summary in self.arms:
            if summary.arm == name:
                return summary
        raise KeyError(name)


def r_key(r: float) -> str:
    return f"{r:g}"
