"""Learning-rate schedules with horizon compression."""

from __future__ import annotations

import math

from sunkcost.models.specs import SchedulerFamily, SchedulerSpec


def compressed_milestones(sched: SchedulerSpec) -> list[int]:
    return [math.ceil(sched.multiplier * m) for m in sched.milestones]


def lr_at(sched: SchedulerSpec, iteration: float) -> float:
    """Learning rate at iteration t (t may be fractional when comparing compressions)."""
    if iteration < 0:
        raise ValueError(f"iteration must be >= 0, got {iteration}")

    if sched.family == SchedulerFamily.CONSTANT:
        return sched.eta_max

    if sched.family == SchedulerFamily.MULTISTEP:
        passed = sum(1 for m in compressed_milestones(sched) if iteration >= m)
        return sched.eta_max * sched.gamma**passed

    horizon = sched.effective_horizon
    if iteration >= horizon:
        return sched.eta_min
    if iteration == 0:
        return sched.eta_max
    progress = iteration / horizon
    span = sched.eta_max - sched.eta_min
    return sched.eta_min + 0.5 * span * (1.0 + math.cos(math.pi * progress))
