"""
Parameter containers for the dense classifier.

A ParamSet is an ordered mapping from parameter name to a float64 array.
Snapshots of the old model, the random model, the phase-start model and
gradients all use the same container so that the update rules
(shrink-and-perturb, L2-init anchors, optimizer updates) are plain elementwise
linear algebra over matching structures.
"""

from __future__ import annotations

from collections.abc import Callable, Iterator
from pathlib import Path

import numpy as np
import numpy.typing as npt

Tensor = npt.NDArray[np.float64]


class ParamStructureError(ValueError):
    """Raised when two ParamSets do not share names and shapes."""

    pass


class ParamSet:
    """Ordered, named collection of float64 tensors."""

    __slots__ = ("entries",)

    def __init__(self, entries: dict[str, Tensor]):
        self.entries: dict[str, Tensor] = {
            name: np.asarray(value, dtype=np.float64) for name, value in entries.items()
        }

    # ------------------------------
    # Structure
    # ------------------------------

    def names(self) -> list[str]:
        return list(self.entries)

    def shapes(self) -> dict[str, tuple[int, ...]]:
        return {name: value.shape for name, value in self.entries.items()}

    def same_structure(self, other: ParamSet) -> bool:
        return list(self.shapes().items()) == list(other.shapes().items())

    def check_structure(self, other: ParamSet) -> None:
        if not self.same_structure(other):
            raise ParamStructureError(
                f"ParamSet structures differ: {self.shapes()} vs {other.shapes()}"
            )

    def size(self) -> int:
        return sum(value.size for value in self.entries.values())

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[str]:
        return iter(self.entries)

    def __getitem__(self, name: str) -> Tensor:
        return self.entries[name]

    def items(self):
        return self.entries.items()

    # ------------------------------
    # Arithmetic
    # ------------------------------

    def map(self, fn: Callable[[Tensor], Tensor]) -> ParamSet:
        return ParamSet({name: fn(value) for name, value in self.entries.items()})

    def zip_map(self, other: ParamSet, fn: Callable[[Tensor, Tensor], Tensor]) -> ParamSet:
        self.check_structure(other)
        return ParamSet(
            {name: fn(value, other.entries[name]) for name, value in self.entries.items()}
        )

    def combine(self, other: ParamSet, a: float, b: float) -> ParamSet:
        """Elementwise a * self + b * other."""
        return self.zip_map(other, lambda x, y: a * x + b * y)

    def __add__(self, other: ParamSet) -> ParamSet:
        return self.zip_map(other, lambda x, y: x + y)

    def __sub__(self, other: ParamSet) -> ParamSet:
        return self.zip_map(other, lambda x, y: x - y)

    def scale(self, k: float) -> ParamSet:
        return self.map(lambda x: k * x)

    def zeros_like(self) -> ParamSet:
        return self.map(np.zeros_like)

    def copy(self) -> ParamSet:
        return self.map(np.copy)

    def squared_norm(self) -> float:
        return float(sum(np.sum(value * value) for value in self.entries.values()))

    def flat(self) -> Tensor:
        if not self.entries:
            return np.zeros(0, dtype=np.float64)
        return np.concatenate([value.ravel() for value in self.entries.values()])

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(value)) for value in self.entries.values())

    def bit_equal(self, other: ParamSet) -> bool:
        """True when names, shapes and raw bytes all match."""
        if not self.same_structure(other):
            return False
        return all(
            value.tobytes() == other.entries[name].tobytes()
            for name, value in self.entries.items()
        )

    # ------------------------------
    # Persistence
    # ------------------------------

    def save(self, path: Path) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "wb") as f:
            np.savez(f, **self.entries)

    @classmethod
    def load(cls, path: Path) -> ParamSet:
        with np.load(path) as archive:
            # npz preserves insertion order of the keyword arguments
            return cls({name: archive[name] for name in archive.files})

    def __repr__(self) -> str:  # pragma: no cover - human-readable helper
        return f"ParamSet({self.shapes()})"
