"""
Learning-speed bookkeeping for easy/hard batch composition.

The learning speed of a sample is the fraction of recorded epochs at whose end
the model classified it correctly. It is collected while the old model trains
and later orders the old samples from easy (always right) to hard (never right).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import numpy.typing as npt


class LearningSpeedError(ValueError):
    """Raised for malformed correctness matrices or learning-speed tables."""

    pass


@dataclass(eq=False)
class CorrectnessMatrix:
    """Rows are samples (by id), columns are epochs 1..E; True means classified correctly."""

    ids: npt.NDArray[np.int64]
    correct: npt.NDArray[np.bool_]

    def __post_init__(self):
        self.ids = np.asarray(self.ids, dtype=np.int64)
        self.correct = np.asarray(self.correct, dtype=bool)
        if self.correct.ndim != 2 or self.correct.shape[0] != self.ids.shape[0]:
            raise LearningSpeedError(
                f"correctness matrix shape {self.correct.shape} does not match "
                f"{self.ids.shape[0]} sample ids"
            )

    @property
    def epochs(self) -> int:
        return int(self.correct.shape[1])

    @classmethod
    def from_columns(
        cls, ids: npt.NDArray[np.int64], columns: list[npt.NDArray[np.bool_]]
    ) -> CorrectnessMatrix:
        """Stack per-epoch correctness vectors recorded at the end of each epoch."""
        ids = np.asarray(ids, dtype=np.int64)
        for epoch, column in enumerate(columns, start=1):
            if np.shape(column) != ids.shape:
                raise LearningSpeedError(
                    f"epoch {epoch} covers {np.shape(column)} samples, expected {ids.shape}"
                )
        if columns:
            correct = np.stack([np.asarray(c, dtype=bool) for c in columns], axis=1)
        else:
            correct = np.zeros((ids.shape[0], 0), dtype=bool)
        return cls(ids=ids, correct=correct)

    def to_csv(self, path: Path) -> None:
        """Learning-order export: id, ls, then one 0/1 column per epoch."""
        table = record_learning_speed(self)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["id", "ls", *[f"epoch_{e}" for e in range(1, self.epochs + 1)]])
            for row, sample_id in enumerate(self.ids):
                writer.writerow(
                    [int(sample_id), repr(float(table.speeds[row])),
                     *[int(v) for v in self.correct[row]]]
                )


@dataclass(eq=False)
class LearningSpeedTable:
    """Map sample id -> learning speed in [0, 1]."""

    ids: npt.NDArray[np.int64]
    speeds: npt.NDArray[np.float64]

    def __post_init__(self):
        self.ids = np.asarray(self.ids, dtype=np.int64)
        self.speeds = np.asarray(self.speeds, dtype=np.float64)
        if self.ids.shape != self.speeds.shape or self.ids.ndim != 1:
            raise LearningSpeedError("ids and speeds must be parallel 1-d arrays")
        if np.unique(self.ids).size != self.ids.size:
            raise LearningSpeedError("learning-speed table has duplicate ids")
        if np.any(~np.isfinite(self.speeds)) or np.any(self.speeds < 0) or np.any(self.speeds > 1):
            raise LearningSpeedError("learning speeds must lie in [0, 1]")

    def __len__(self) -> int:
        return int(self.ids.size)

    def as_dict(self) -> dict[int, float]:
        return {int(i): float(s) for i, s in zip(self.ids, self.speeds, strict=True)}

    def covers(self, ids: npt.NDArray[np.int64]) -> bool:
        return bool(np.all(np.isin(ids, self.ids)))

    def lookup(self, ids: npt.NDArray[np.int64]) -> npt.NDArray[np.float64]:
        order = np.argsort(self.ids)
        sorted_ids = self.ids[order]
        pos = np.searchsorted(sorted_ids, ids)
        pos = np.clip(pos, 0, max(sorted_ids.size - 1, 0))
        if sorted_ids.size == 0 or np.any(sorted_ids[pos] != ids):
            raise LearningSpeedError("learning-speed table is missing requested ids")
        return self.speeds[order][pos]

    def to_csv(self, path: Path) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["id", "ls"])
            for sample_id, speed in zip(self.ids, self.speeds, strict=True):
                writer.writerow([int(sample_id), repr(float(speed))])

    @classmethod
    def from_csv(cls, path: Path) -> LearningSpeedTable:
        with open(path, newline="") as f:
            reader = csv.DictReader(f)
            if reader.fieldnames != ["id", "ls"]:
                raise LearningSpeedError(f"{path}: expected columns id,ls got {reader.fieldnames}")
            rows = [(int(row["id"]), float(row["ls"])) for row in reader]
        ids = np.array([r[0] for r in rows], dtype=np.int64)
        speeds = np.array([r[1] for r in rows], dtype=np.float64)
        return cls(ids=ids, speeds=speeds)


def record_learning_speed(matrix: CorrectnessMatrix) -> LearningSpeedTable:
    """ls(x_j) = (1/E) * sum_i 1[f^i(x_j) = y_j] over the recorded epochs."""
    if matrix.epochs < 1:
        raise LearningSpeedError("learning speed needs at least one recorded epoch")
    speeds = matrix.correct.sum(axis=1, dtype=np.int64) / matrix.epochs
    return LearningSpeedTable(ids=matrix.ids.copy(), speeds=speeds.astype(np.float64))
