"""Seed aggregation: mean curve and standard error per arm, metrics on the mean curve."""

from __future__ import annotations

import logging
from collections.abc import Iterable, Sequence

import numpy as np

from sunkcost.metrics.speed import (
    LearningCurve,
    MetricsError,
    relative_speedup,
    scratch_target,
    speed,
)
from sunkcost.models.records import ArmSummary, RunRecord, RunStatus, SpeedReport, r_key
from sunkcost.models.specs import TargetMode


def group_by_arm(records: Iterable[RunRecord]) -> dict[str, list[RunRecord]]:
    """Records per arm in order of first appearance, each list sorted by seed."""
    groups: dict[str, list[RunRecord]] = {}
    for record in records:
        groups.setdefault(record.arm, []).append(record)
    return {arm: sorted(group, key=lambda r: r.seed) for arm, group in groups.items()}


def mean_curve(records: Sequence[RunRecord]) -> tuple[list[int], list[float], list[float]]:
    """Per-iteration mean accuracy and standard error across seeds."""
    if not records:
        raise MetricsError("cannot average zero records")
    grid = records[0].eval_iterations
    for record in records[1:]:
        if record.eval_iterations != grid:
            raise MetricsError(
                f"arm {record.arm!r}: seed {record.seed} evaluates at a different grid than "
                f"seed {records[0].seed}"
            )
    stack = np.array([record.test_accuracy for record in records], dtype=np.float64)
    constant = np.ptp(stack, axis=0) == 0.0
    mean = np.where(constant, stack[0], np.clip(stack.mean(axis=0), 0.0, 1.0))
    if len(records) > 1:
        se = np.where(constant, 0.0, stack.std(axis=0, ddof=1) / np.sqrt(len(records)))
    else:
        se = np.zeros(stack.shape[1])
    return list(grid), mean.tolist(), se.tolist()


def _summarize(arm: str, records: list[RunRecord]) -> tuple[ArmSummary, LearningCurve | None]:
    completed = [r for r in records if r.status == RunStatus.COMPLETED and r.eval_iterations]
    summary = ArmSummary(
        arm=arm,
        seeds=[r.seed for r in records],
        components=records[0].components,
        diverged_seeds=[r.seed for r in records if r.status == RunStatus.DIVERGED],
    )
    if not completed:
        return summary, None
    iterations, mean, se = mean_curve(completed)
    best = int(np.argmax(mean))
    summary.eval_iterations = iterations
    summary.mean_accuracy = mean
    summary.se_accuracy = se
    summary.max_accuracy = mean[best]
    summary.max_accuracy_se = se[best]
    summary.final_accuracy = mean[-1]
    return summary, LearningCurve(tuple(iterations), tuple(mean))


def aggregate(
    records: Iterable[RunRecord],
    baseline_arm: str = "scratch",
    r_values: Sequence[float] = (99.0, 100.0),
    target_mode: TargetMode = TargetMode.FINAL,
) -> SpeedReport:
    """SpeedReport over every arm in `records` against the baseline arm."""
    groups = group_by_arm(records)
    if baseline_arm not in groups:
        raise MetricsError(f"no records for baseline arm {baseline_arm!r}")

    summaries: list[ArmSummary] = []
    curves: dict[str, LearningCurve | None] = {}
    for arm, group in groups.items():
        summary, curve = _summarize(arm, group)
        summaries.append(summary)
        curves[arm] = curve

    scratch = curves[baseline_arm]
    if scratch is None:
        raise MetricsError(f"baseline arm {baseline_arm!r} has no completed runs")
    a_scratch = scratch_target(scratch, target_mode)
    notes = [
        f"a_scratch = {target_mode.value} accuracy of the {baseline_arm!r} seed-mean curve "
        f"({a_scratch:.4f})"
    ]

    for summary in summaries:
        curve = curves[summary.arm]
        for r in r_values:
            key = r_key(r)
            if curve is None:
                summary.speeds[key] = None
                summary.speedups[key] = None
                continue
            summary.speeds[key] = speed(curve, r / 100.0 * a_scratch)
            summary.speedups[key] = relative_speedup(curve, scratch, a_scratch, r)
        if summary.diverged_seeds:
            notes.append(f"{summary.arm}: diverged seeds {summary.diverged_seeds} excluded")
            logging.warning(f"{summary.arm}: seeds {summary.diverged_seeds} diverged")

    return SpeedReport(
        baseline_arm=baseline_arm,
        target_mode=target_mode,
        a_scratch=a_scratch,
        scratch_speed=speed(scratch, a_scratch),
        r_values=list(r_values),
        eval_resolution=groups[baseline_arm][0].eval_every,
        arms=summaries,
        notes=notes,
    )
