"""
Warm-start initialization rules.

- scratch: fresh random parameters.
- naive: a copy of the base parameters.
- shrink_perturb: alpha * base + beta * random.

The base is the previously trained model (source=old) or a fresh random model
(source=random, used by scratch arms that still shrink and perturb).
"""

from __future__ import annotations

import logging

from sunkcost.core.network import init_params, param_shapes
from sunkcost.core.params import ParamSet, ParamStructureError
from sunkcost.models.specs import InitMode, InitSpec, NetworkSpec, ParamSource

# seed streams derived from the run seed, kept apart so that the random base of a
# scratch arm and its perturbation are independent draws
_BASE_STREAM = 0
_PERTURB_STREAM = 1


def shrink_perturb(old: ParamSet, random: ParamSet, alpha: float, beta: float) -> ParamSet:
    """Elementwise alpha * old + beta * random over every parameter, biases included."""
    old.check_structure(random)
    if not 0.0 <= alpha <= 1.0 or not beta >= 0.0:
        raise ValueError(f"need alpha in [0, 1] and beta >= 0, got alpha={alpha}, beta={beta}")
    if alpha == 1.0 and beta == 0.0:
        return old.copy()
    return old.combine(random, alpha, beta)


def _stream_seed(seed: int, stream: int) -> int:
    return seed * 2 + stream


def initial_params(
    spec: InitSpec, network: NetworkSpec, seed: int, old: ParamSet | None = None
) -> ParamSet:
    """Phase-start parameters for one run."""
    base_seed = _stream_seed(seed, _BASE_STREAM)
    perturb_seed = (
        spec.random_seed if spec.random_seed is not None else _stream_seed(seed, _PERTURB_STREAM)
    )

    if spec.mode == InitMode.SCRATCH:
        return init_params(network, base_seed)

    if spec.source == ParamSource.OLD:
        if old is None:
            raise ParamStructureError(f"{spec.mode.value} initialization needs old parameters")
        base = old
    else:
        base = init_params(network, base_seed)

    if spec.mode == InitMode.NAIVE:
        expected = param_shapes(network)
        if list(base.shapes().items()) != list(expected.items()):
            raise ParamStructureError(
                f"old parameters {base.shapes()} do not fit the network {expected}"
            )
        return base.copy()

    perturbation = init_params(network, perturb_seed)
    logging.debug(
        f"shrink_perturb alpha={spec.alpha} beta={spec.beta} source={spec.source.value}"
    )
    return shrink_perturb(base, perturbation, spec.alpha, spec.beta)
