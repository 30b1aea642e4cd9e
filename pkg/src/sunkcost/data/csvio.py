"""
CSV layout for datasets, for inspection outside Python.

Columns, in order: ``id, origin, label, f0 .. f{D-1}``. ``origin`` is ``old`` or
``new``; features are written with ``repr`` so they read back bit-exactly.
A leading comment line ``# class_count=<K> role=<train|test>`` carries the
dataset metadata.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from sunkcost.data.synthetic import Dataset, DatasetError, Origin, Role


def write_dataset_csv(dataset: Dataset, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        f.write(f"# class_count={dataset.class_count} role={dataset.role.value}\n")
        writer = csv.writer(f)
        writer.writerow(["id", "origin", "label", *[f"f{j}" for j in range(dataset.dimension)]])
        for sample in dataset:
            writer.writerow(
                [sample.id, sample.origin.value, sample.label,
                 *[repr(float(v)) for v in sample.features]]
            )


def read_dataset_csv(path: Path) -> Dataset:
    with open(path, newline="") as f:
        header = f.readline().strip()
        try:
            meta = dict(part.split("=", 1) for part in header.lstrip("# ").split())
            class_count = int(meta["class_count"])
            role = Role(meta["role"])
        except (KeyError, ValueError) as e:
            raise DatasetError(f"{path}: malformed metadata line {header!r}") from e
        reader = csv.reader(f)
        columns = next(reader)
        if columns[:3] != ["id", "origin", "label"]:
            raise DatasetError(f"{path}: unexpected columns {columns[:3]}")
        dimension = len(columns) - 3
        ids, is_new, labels, features = [], [], [], []
        for row in reader:
            ids.append(int(row[0]))
            is_new.append(Origin(row[1]) == Origin.NEW)
            labels.append(int(row[2]))
            features.append([float(v) for v in row[3:]])
    return Dataset(
        ids=np.array(ids, dtype=np.int64),
        features=np.array(features, dtype=np.float64).reshape(-1, dimension),
        labels=np.array(labels, dtype=np.int64),
        is_new=np.array(is_new, dtype=bool),
        class_count=class_count,
        role=role,
    )
