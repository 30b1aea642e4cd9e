"""
Batch composition strategies.

- proportional: independent draws with replacement over all training samples,
  so old:new follows the dataset ratio.
- balanced_old_new: floor(N/2) uniform draws from old samples, ceil(N/2) from new.
- easy_hard: proportional draws where the c/2 easiest and c/2 hardest old samples
  (by learning speed) carry relative weight r; new samples always weigh 1.
"""

from __future__ import annotations

import math

import numpy as np
import numpy.typing as npt

from sunkcost.data.synthetic import Dataset
from sunkcost.models.specs import SamplerMode, SamplerSpec
from sunkcost.sampling.learning_speed import LearningSpeedTable


class SamplerError(ValueError):
    """Raised when a sampler cannot be built for the given dataset."""

    pass


def affected_per_side(n: int, c: float) -> int:
    """Samples affected at each end of the easy-to-hard order."""
    return int(math.floor(c * n / 2.0 + 1e-9))


def easy_hard_order(table: LearningSpeedTable) -> npt.NDArray[np.intp]:
    """Positions into the table, easiest first; ties broken by ascending id."""
    return np.lexsort((table.ids, -table.speeds))


def _easy_hard_weight_array(table: LearningSpeedTable, c: float, r: float) -> npt.NDArray:
    n = len(table)
    k = affected_per_side(n, c)
    weights = np.ones(n, dtype=np.float64)
    if k:
        order = easy_hard_order(table)
        weights[order[:k]] = r
        weights[order[n - k:]] = r
    return weights


def easy_hard_weights(table: LearningSpeedTable, c: float, r: float) -> dict[int, float]:
    if len(table) == 0:
        raise SamplerError("easy/hard weights need a nonempty learning-speed table")
    if not 0.0 <= c < 1.0 or not r >= 0.0:
        raise SamplerError(f"need 0 <= c < 1 and r >= 0, got c={c}, r={r}")
    weights = _easy_hard_weight_array(table, c, r)
    return {int(i): float(w) for i, w in zip(table.ids, weights, strict=True)}


class BatchSampler:
    """Precomputed draw distribution over one training set."""

    def __init__(self, spec: SamplerSpec, dataset: Dataset):
        if len(dataset) == 0:
            raise SamplerError("cannot sample from an empty dataset")
        self.spec = spec
        self.dataset = dataset
        self.probabilities: npt.NDArray[np.float64] | None = None
        self._old = np.flatnonzero(~dataset.is_new)
        self._new = np.flatnonzero(dataset.is_new)

        if spec.mode == SamplerMode.BALANCED:
            if self._old.size == 0 or self._new.size == 0:
                raise SamplerError("balanced old/new sampling needs both old and new samples")
            return

        weights = np.ones(len(dataset), dtype=np.float64)
        if spec.mode == SamplerMode.EASY_HARD and self._old.size:
            table = spec.learning_speeds
            if table is None or len(table) == 0:
                raise SamplerError("easy_hard sampling needs a learning-speed table")
            old_ids = dataset.ids[self._old]
            if not table.covers(old_ids):
                raise SamplerError("learning-speed table does not cover every old sample")
            by_id = _easy_hard_weight_array(table, spec.c, spec.r)
            order = np.argsort(table.ids)
            pos = np.searchsorted(table.ids[order], old_ids)
            weights[self._old] = by_id[order][pos]
        total = weights.sum()
        if not total > 0.0:
            raise SamplerError("every sample has zero weight")
        self.probabilities = weights / total

    def draw(self, n: int, rng: np.random.Generator) -> npt.NDArray[np.intp]:
        """Row indices of one batch."""
        if n < 1:
            raise SamplerError(f"batch size must be >= 1, got {n}")
        if self.probabilities is None:
            old = self._old[rng.integers(0, self._old.size, size=n // 2)]
            new = self._new[rng.integers(0, self._new.size, size=n - n // 2)]
            return np.concatenate([old, new])
        return rng.choice(len(self.dataset), size=n, replace=True, p=self.probabilities)


def sample_batch(
    spec: SamplerSpec, dataset: Dataset, batch_size: int, rng: np.random.Generator
) -> npt.NDArray[np.int64]:
    """Sample ids of one batch."""
    return dataset.ids[BatchSampler(spec, dataset).draw(batch_size, rng)]
