"""
Synthetic scenarios: Gaussian class clusters, class-incremental splits,
simulated domain shift, and old/new merging with stable sample identity.
"""

from __future__ import annotations

import hashlib
from collections.abc import Iterator
from dataclasses import dataclass
from enum import Enum

import numpy as np
import numpy.typing as npt

from sunkcost.models.specs import GeneratorParams, ShiftParams, fingerprint_of

# ids of shifted samples live above this offset so they never collide with generated ones
SHIFTED_ID_OFFSET = 1 << 40


class Origin(str, Enum):
    OLD = "old"
    NEW = "new"


class Role(str, Enum):
    TRAIN = "train"
    TEST = "test"


class DatasetError(ValueError):
    """Raised for inconsistent datasets, splits or merges."""

    pass


@dataclass(frozen=True)
class Sample:
    id: int
    features: npt.NDArray[np.float64]
    label: int
    origin: Origin


@dataclass(eq=False)
class Dataset:
    """Column-oriented samples: ids, feature matrix, labels and old/new flags."""

    ids: npt.NDArray[np.int64]
    features: npt.NDArray[np.float64]
    labels: npt.NDArray[np.int64]
    is_new: npt.NDArray[np.bool_]
    class_count: int
    role: Role = Role.TRAIN

    def __post_init__(self):
        self.ids = np.asarray(self.ids, dtype=np.int64)
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.is_new = np.asarray(self.is_new, dtype=bool)
        n = self.ids.shape[0]
        if self.features.ndim != 2 or self.features.shape[0] != n:
            raise DatasetError(f"features shape {self.features.shape} does not match {n} ids")
        if self.labels.shape != (n,) or self.is_new.shape != (n,):
            raise DatasetError("labels and origin flags must have one entry per sample")
        if np.unique(self.ids).size != n:
            raise DatasetError("sample ids must be unique within a dataset")
        if n and (self.labels.min() < 0 or self.labels.max() >= self.class_count):
            raise DatasetError(f"labels must lie in [0, {self.class_count})")

    def __len__(self) -> int:
        return int(self.ids.shape[0])

    def __iter__(self) -> Iterator[Sample]:
        for i in range(len(self)):
            yield self.sample(i)

    @property
    def dimension(self) -> int:
        return int(self.features.shape[1])

    def sample(self, index: int) -> Sample:
        return Sample(
            id=int(self.ids[index]),
            features=self.features[index],
            label=int(self.labels[index]),
            origin=Origin.NEW if self.is_new[index] else Origin.OLD,
        )

    def subset(self, mask_or_index: npt.NDArray) -> Dataset:
        return Dataset(
            ids=self.ids[mask_or_index],
            features=self.features[mask_or_index],
            labels=self.labels[mask_or_index],
            is_new=self.is_new[mask_or_index],
            class_count=self.class_count,
            role=self.role,
        )

    def origin_mask(self, origin: Origin) -> npt.NDArray[np.bool_]:
        return self.is_new if origin == Origin.NEW else ~self.is_new

    def origin_counts(self) -> dict[Origin, int]:
        new = int(self.is_new.sum())
        return {Origin.OLD: len(self) - new, Origin.NEW: new}

    def classes(self) -> set[int]:
        return {int(c) for c in np.unique(self.labels)}

    def tagged(self, origin: Origin) -> Dataset:
        return Dataset(
            ids=self.ids,
            features=self.features,
            labels=self.labels,
            is_new=np.full(len(self), origin == Origin.NEW),
            class_count=self.class_count,
            role=self.role,
        )

    def fingerprint(self) -> str:
        return fingerprint_of(
            {
                "role": self.role.value,
                "class_count": self.class_count,
                "shape": list(self.features.shape),
            },
            _digest(self.ids, self.features, self.labels, self.is_new),
        )

    @classmethod
    def empty(cls, dimension: int, class_count: int, role: Role = Role.TRAIN) -> Dataset:
        return cls(
            ids=np.zeros(0, dtype=np.int64),
            features=np.zeros((0, dimension)),
            labels=np.zeros(0, dtype=np.int64),
            is_new=np.zeros(0, dtype=bool),
            class_count=class_count,
            role=role,
        )


def _digest(*arrays: npt.NDArray) -> str:
    h = hashlib.sha256()
    for array in arrays:
        h.update(np.ascontiguousarray(array).tobytes())
    return h.hexdigest()


def gen_gaussian_classes(
    params: GeneratorParams, seed: int | None = None
) -> tuple[Dataset, Dataset]:
    """One isotropic Gaussian cluster per class; per-class held-out test samples.

    Train ids are 0..n_train-1 (class-major), test ids continue after them.
    """
    rng = np.random.default_rng(params.seed if seed is None else seed)
    k, d = params.classes, params.dimension
    means = rng.normal(0.0, params.mean_scale, size=(k, d))
    per_class = params.train_per_class + params.test_per_class
    features = means[:, None, :] + params.cluster_spread * rng.normal(size=(k, per_class, d))
    labels = np.repeat(np.arange(k, dtype=np.int64), per_class).reshape(k, per_class)

    cut = params.train_per_class
    train_x = features[:, :cut].reshape(-1, d)
    test_x = features[:, cut:].reshape(-1, d)
    train_y = labels[:, :cut].reshape(-1)
    test_y = labels[:, cut:].reshape(-1)
    n_train = train_x.shape[0]
    train = Dataset(
        ids=np.arange(n_train, dtype=np.int64),
        features=train_x,
        labels=train_y,
        is_new=np.zeros(n_train, dtype=bool),
        class_count=k,
        role=Role.TRAIN,
    )
    test = Dataset(
        ids=np.arange(n_train, n_train + test_x.shape[0], dtype=np.int64),
        features=test_x,
        labels=test_y,
        is_new=np.zeros(test_x.shape[0], dtype=bool),
        class_count=k,
        role=Role.TEST,
    )
    return train, test


def _group_relabel(order: npt.NDArray[np.int64], splits: list[int]) -> npt.NDArray[np.int64]:
    """Map each class into its group's label range, keeping labels already inside it."""
    relabel = np.empty(order.size, dtype=np.int64)
    start = 0
    for size in splits:
        members = order[start : start + size]
        inside = (members >= start) & (members < start + size)
        free = np.setdiff1d(np.arange(start, start + size), members[inside])
        relabel[members[inside]] = members[inside]
        relabel[np.sort(members[~inside])] = free
        start += size
    return relabel


def split_by_class(
    train: Dataset, test: Dataset, splits: list[int], seed: int
) -> list[tuple[Dataset, Dataset]]:
    """Cut a seeded class permutation into groups of the given sizes.

    Labels are re-indexed globally: the first group's classes become 0..g0-1,
    the next group's g0..g0+g1-1, and so on; class_count stays the full count.
    A class whose label already falls in its group's range keeps it; a single
    group returns the input pair unchanged.
    """
    k = train.class_count
    if test.class_count != k:
        raise DatasetError("train and test disagree on class_count")
    if any(s <= 0 for s in splits) or sum(splits) != k:
        raise DatasetError(f"splits {splits} must be positive and sum to {k}")
    if len(splits) == 1:
        return [(train, test)]
    order = np.random.default_rng(seed).permutation(k)
    relabel = _group_relabel(order, splits)

    groups: list[tuple[Dataset, Dataset]] = []
    start = 0
    for size in splits:
        new_labels = np.arange(start, start + size)
        pair = []
        for source in (train, test):
            mapped = relabel[source.labels]
            mask = np.isin(mapped, new_labels)
            pair.append(
                Dataset(
                    ids=source.ids[mask],
                    features=source.features[mask],
                    labels=mapped[mask],
                    is_new=source.is_new[mask],
                    class_count=k,
                    role=source.role,
                )
            )
        groups.append((pair[0], pair[1]))
        start += size
    return groups


def _rotation_matrix(dimension: int, angle: float, rng: np.random.Generator) -> npt.NDArray:
    """Rotate by `angle` inside floor(d/2) random orthogonal planes."""
    basis, _ = np.linalg.qr(rng.normal(size=(dimension, dimension)))
    planar = np.eye(dimension)
    c, s = np.cos(angle), np.sin(angle)
    for p in range(dimension // 2):
        i, j = 2 * p, 2 * p + 1
        planar[i, i], planar[i, j], planar[j, i], planar[j, j] = c, -s, s, c
    return basis @ planar @ basis.T


def apply_domain_shift(
    dataset: Dataset, shift: ShiftParams, seed: int, id_offset: int = SHIFTED_ID_OFFSET
) -> Dataset:
    """Fixed random rotation + translation + additive noise; labels unchanged, new ids."""
    rng = np.random.default_rng(seed)
    d = dataset.dimension
    features = dataset.features
    if shift.rotation != 0.0:
        features = features @ _rotation_matrix(d, shift.rotation, rng).T
    if shift.translation_scale != 0.0:
        features = features + shift.translation_scale * rng.normal(size=d)
    if shift.noise_std != 0.0:
        features = features + shift.noise_std * rng.normal(size=features.shape)
    return Dataset(
        ids=dataset.ids + id_offset,
        features=np.array(features, dtype=np.float64, copy=True),
        labels=dataset.labels.copy(),
        is_new=dataset.is_new.copy(),
        class_count=dataset.class_count,
        role=dataset.role,
    )


def merge(old: Dataset, new: Dataset) -> Dataset:
    """D = D_old ∪ D_new; every sample of `old` is tagged old, every sample of `new` new."""
    if len(old) and len(new) and old.dimension != new.dimension:
        raise DatasetError(f"feature dimensions differ: {old.dimension} vs {new.dimension}")
    collisions = np.intersect1d(old.ids, new.ids)
    if collisions.size:
        raise DatasetError(f"id collision on merge: {collisions[:5].tolist()}")
    dimension = old.dimension if len(old) or not len(new) else new.dimension
    return Dataset(
        ids=np.concatenate([old.ids, new.ids]),
        features=np.concatenate(
            [old.features.reshape(-1, dimension), new.features.reshape(-1, dimension)]
        ),
        labels=np.concatenate([old.labels, new.labels]),
        is_new=np.concatenate([np.zeros(len(old), bool), np.ones(len(new), bool)]),
        class_count=max(old.class_count, new.class_count),
        role=old.role,
    )
