"""
Plain SGD and Adam without weight decay.

Gradients passed in are already batch means (the 1/N is applied by the
objective), so both steps consume them as-is.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from sunkcost.core.params import ParamSet
from sunkcost.models.specs import OptimizerKind

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class OptimizerState:
    kind: OptimizerKind
    step: int = 0
    first_moment: ParamSet | None = None
    second_moment: ParamSet | None = None
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    eps: float = ADAM_EPS

    def __post_init__(self):
        if self.step < 0:
            raise ValueError("optimizer step counter must be >= 0")

    def all_finite(self) -> bool:
        moments = [m for m in (self.first_moment, self.second_moment) if m is not None]
        return all(m.all_finite() for m in moments)


def init_optimizer(kind: OptimizerKind, params: ParamSet) -> OptimizerState:
    if kind == OptimizerKind.ADAM:
        return OptimizerState(
            kind=kind, first_moment=params.zeros_like(), second_moment=params.zeros_like()
        )
    return OptimizerState(kind=kind)


def sgd_step(params: ParamSet, grads: ParamSet, lr: float) -> ParamSet:
    """theta - lr * g."""
    if lr < 0.0:
        raise ValueError(f"learning rate must be >= 0, got {lr}")
    return params.combine(grads, 1.0, -lr)


def adam_step(
    state: OptimizerState, params: ParamSet, grads: ParamSet, lr: float
) -> tuple[ParamSet, OptimizerState]:
    """Bias-corrected Adam update; returns new params and a new state."""
    if state.first_moment is None or state.second_moment is None:
        raise ValueError("adam_step needs an Adam optimizer state")
    if lr < 0.0:
        raise ValueError(f"learning rate must be >= 0, got {lr}")
    params.check_structure(grads)
    params.check_structure(state.first_moment)

    b1, b2, eps = state.beta1, state.beta2, state.eps
    step = state.step + 1
    m = state.first_moment.combine(grads, b1, 1.0 - b1)
    v = state.second_moment.zip_map(grads, lambda v_, g: b2 * v_ + (1.0 - b2) * g * g)
    c1 = 1.0 - b1**step
    c2 = 1.0 - b2**step

    updated = {}
    for name, value in params.items():
        m_hat = m[name] / c1
        v_hat = v[name] / c2
        updated[name] = value - lr * m_hat / (np.sqrt(v_hat) + eps)

    new_state = OptimizerState(
        kind=state.kind,
        step=step,
        first_moment=m,
        second_moment=v,
        beta1=b1,
        beta2=b2,
        eps=eps,
    )
    return ParamSet(updated), new_state


def optimizer_step(
    state: OptimizerState, params: ParamSet, grads: ParamSet, lr: float
) -> tuple[ParamSet, OptimizerState]:
    if state.kind == OptimizerKind.ADAM:
        return adam_step(state, params, grads, lr)
    params = sgd_step(params, grads, lr)
    return params, OptimizerState(kind=state.kind, step=state.step + 1)
