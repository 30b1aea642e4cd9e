"""
Fully connected ReLU classifier with analytic forward and backward passes.

Parameters are named ``layer{i}.weight`` (fan_in x fan_out) and
``layer{i}.bias`` (fan_out). Activations are row-major: ``z = a @ W + b``.
All arithmetic is float64.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt

from sunkcost.core.params import ParamSet, Tensor
from sunkcost.models.specs import NetworkSpec, ObjectiveMode, ObjectiveSpec


class ShapeMismatchError(ValueError):
    """Raised when a batch does not fit the network's input width."""

    pass


class ObjectiveError(ValueError):
    """Raised for unusable objective inputs (empty batch, bad labels, missing anchor)."""

    pass


@dataclass
class ForwardCache:
    """Per-layer inputs and pre-activations for one batch."""

    inputs: list[Tensor] = field(default_factory=list)
    pre_activations: list[Tensor] = field(default_factory=list)
    logits: Tensor | None = None


def weight_name(layer: int) -> str:
    return f"layer{layer}.weight"


def bias_name(layer: int) -> str:
    return f"layer{layer}.bias"


def layer_count(params: ParamSet) -> int:
    return len(params) // 2


def param_shapes(spec: NetworkSpec) -> dict[str, tuple[int, ...]]:
    """Expected ParamSet shapes, in order, for a network of this spec."""
    shapes: dict[str, tuple[int, ...]] = {}
    for layer, (fan_in, fan_out) in enumerate(
        zip(spec.layer_widths[:-1], spec.layer_widths[1:], strict=True)
    ):
        shapes[weight_name(layer)] = (fan_in, fan_out)
        shapes[bias_name(layer)] = (fan_out,)
    return shapes


def init_params(spec: NetworkSpec, seed: int) -> ParamSet:
    """Fan-in scaled uniform weights (bound sqrt(6 / fan_in)), zero biases."""
    rng = np.random.default_rng(seed)
    entries: dict[str, Tensor] = {}
    for layer, (fan_in, fan_out) in enumerate(
        zip(spec.layer_widths[:-1], spec.layer_widths[1:], strict=True)
    ):
        bound = np.sqrt(6.0 / fan_in)
        entries[weight_name(layer)] = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        entries[bias_name(layer)] = np.zeros(fan_out, dtype=np.float64)
    return ParamSet(entries)


def forward(params: ParamSet, batch: Tensor) -> tuple[Tensor, ForwardCache]:
    batch = np.asarray(batch, dtype=np.float64)
    first = params[weight_name(0)]
    if batch.ndim != 2 or batch.shape[1] != first.shape[0]:
        raise ShapeMismatchError(
            f"batch of shape {batch.shape} does not fit input width {first.shape[0]} "
            f"({weight_name(0)} is {first.shape[0]}x{first.shape[1]})"
        )
    cache = ForwardCache()
    a = batch
    last = layer_count(params) - 1
    for layer in range(last + 1):
        cache.inputs.append(a)
        z = a @ params[weight_name(layer)] + params[bias_name(layer)]
        cache.pre_activations.append(z)
        a = z if layer == last else np.maximum(z, 0.0)
    cache.logits = a
    return a, cache


def softmax(logits: Tensor) -> Tensor:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def cross_entropy(logits: Tensor, labels: npt.NDArray[np.int64]) -> Tensor:
    """Per-sample softmax cross-entropy via log-sum-exp."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    return log_norm - shifted[np.arange(labels.shape[0]), labels]


def predict(params: ParamSet, batch: Tensor) -> npt.NDArray[np.int64]:
    logits, _ = forward(params, batch)
    return np.argmax(logits, axis=1)


def _check_labels(labels: npt.NDArray[np.int64], n: int, classes: int) -> npt.NDArray[np.int64]:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (n,):
        raise ObjectiveError(f"expected {n} labels, got shape {labels.shape}")
    if n and (labels.min() < 0 or labels.max() >= classes):
        raise ObjectiveError(f"labels must lie in [0, {classes})")
    return labels


def _reference(params: ParamSet, objective: ObjectiveSpec) -> ParamSet:
    if objective.mode == ObjectiveMode.L2:
        return params.zeros_like()
    if objective.reference is None:
        if objective.mode == ObjectiveMode.L2_INIT:
            raise ObjectiveError("l2_init needs a reference snapshot (use anchored_at)")
        return params.zeros_like()
    params.check_structure(objective.reference)
    return objective.reference


def _backward(params: ParamSet, cache: ForwardCache, dlogits: Tensor) -> ParamSet:
    grads: dict[str, Tensor] = {}
    dz = dlogits
    for layer in reversed(range(layer_count(params))):
        grads[weight_name(layer)] = cache.inputs[layer].T @ dz
        grads[bias_name(layer)] = dz.sum(axis=0)
        if layer > 0:
            da = dz @ params[weight_name(layer)].T
            dz = da * (cache.pre_activations[layer - 1] > 0.0)
    return ParamSet({name: grads[name] for name in params.names()})


def loss_and_grad(
    params: ParamSet,
    batch: Tensor,
    labels: npt.NDArray[np.int64],
    objective: ObjectiveSpec,
) -> tuple[float, ParamSet]:
    """Mean cross-entropy over the batch plus lam * ||theta - theta_ref||^2."""
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 2 or batch.shape[0] == 0:
        raise ObjectiveError("loss_and_grad needs a nonempty 2-d batch")
    n = batch.shape[0]

    if objective.has_data_term:
        logits, cache = forward(params, batch)
        labels = _check_labels(labels, n, logits.shape[1])
        loss = float(cross_entropy(logits, labels).mean())
        dlogits = softmax(logits)
        dlogits[np.arange(n), labels] -= 1.0
        grads = _backward(params, cache, dlogits / n)
    else:
        loss = 0.0
        grads = params.zeros_like()

    if objective.mode != ObjectiveMode.NONE and objective.lam > 0.0:
        diff = params - _reference(params, objective)
        loss += objective.lam * diff.squared_norm()
        grads = grads.combine(diff, 1.0, 2.0 * objective.lam)
    return loss, grads


def finite_diff_grad(
    params: ParamSet,
    batch: Tensor,
    labels: npt.NDArray[np.int64],
    objective: ObjectiveSpec,
    h: float = 1e-5,
) -> ParamSet:
    """Central-difference estimate of the gradient returned by loss_and_grad."""
    if not h > 0.0:
        raise ValueError(f"h must be > 0, got {h}")
    probe = params.copy()
    estimate: dict[str, Tensor] = {}
    for name in probe.names():
        values = probe.entries[name]
        grad = np.zeros_like(values)
        for index in np.ndindex(values.shape):
            original = values[index]
            values[index] = original + h
            upper, _ = loss_and_grad(probe, batch, labels, objective)
            values[index] = original - h
            lower, _ = loss_and_grad(probe, batch, labels, objective)
            values[index] = original
            grad[index] = (upper - lower) / (2.0 * h)
        estimate[name] = grad
    return ParamSet(estimate)


def relative_error(analytic: ParamSet, numeric: ParamSet) -> float:
    """Norm-wise ||a - n|| / max(||a|| + ||n||, tiny), the usual gradient-check measure."""
    a, n = analytic.flat(), numeric.flat()
    denom = max(float(np.linalg.norm(a) + np.linalg.norm(n)), 1e-30)
    return float(np.linalg.norm(a - n)) / denom


def per_sample_grad_norms(
    params: ParamSet, batch: Tensor, labels: npt.NDArray[np.int64]
) -> npt.NDArray[np.float64]:
    """Euclidean norm of each sample's cross-entropy gradient over all parameters.

    For a dense layer the per-sample weight gradient is the outer product
    a_n dz_n^T, so its squared norm factors as ||a_n||^2 ||dz_n||^2.
    """
    batch = np.asarray(batch, dtype=np.float64)
    n = batch.shape[0]
    if n == 0:
        return np.zeros(0, dtype=np.float64)
    logits, cache = forward(params, batch)
    labels = _check_labels(labels, n, logits.shape[1])
    dz = softmax(logits)
    dz[np.arange(n), labels] -= 1.0
    total = np.zeros(n, dtype=np.float64)
    for layer in reversed(range(layer_count(params))):
        a = cache.inputs[layer]
        total += (np.sum(a * a, axis=1) + 1.0) * np.sum(dz * dz, axis=1)
        if layer > 0:
            dz = (dz @ params[weight_name(layer)].T) * (cache.pre_activations[layer - 1] > 0.0)
    return np.sqrt(total)
