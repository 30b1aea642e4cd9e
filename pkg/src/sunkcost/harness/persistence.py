"""
On-disk layout of an output directory.

    <out>/records/<arm>__seed<k>.json         RunRecord (run_record.v1)
    <out>/records/<arm>__seed<k>.csv          flat curves, columns as in CSV_COLUMNS
    <out>/records/<arm>__seed<k>.timing.json  wall clock, kept apart so records stay reproducible
    <out>/speed_report.json                   SpeedReport (speed_report.v1)
    <out>/data/seed<k>/<split>.csv            scenario datasets, when export_data is set
    <old_phase_dir>/seed<k>/                  params.npz, meta.json (old_phase.v1),
                                              learning_speed.csv, learning_order.csv
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, ValidationError

from sunkcost.core.params import ParamSet
from sunkcost.data.csvio import write_dataset_csv
from sunkcost.data.synthetic import Dataset
from sunkcost.models.records import RunRecord, SpeedReport
from sunkcost.sampling.learning_speed import (
    CorrectnessMatrix,
    LearningSpeedError,
    LearningSpeedTable,
)

RECORDS_DIR = "records"
DATA_DIR = "data"
REPORT_FILE = "speed_report.json"
TIMING_SUFFIX = ".timing.json"


class HarnessError(RuntimeError):
    """Raised for unusable experiment setups or output directories."""

    pass


def run_stem(arm: str, seed: int) -> str:
    safe = re.sub(r"[^A-Za-z0-9._+-]+", "_", arm).strip("_") or "arm"
    return f"{safe}__seed{seed}"


def write_record(record: RunRecord, directory: Path) -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    stem = run_stem(record.arm, record.seed)
    path = directory / f"{stem}.json"
    path.write_text(record.to_json(), encoding="utf-8")
    (directory / f"{stem}.csv").write_text(record.to_csv(), encoding="utf-8")
    timing = {"arm": record.arm, "seed": record.seed, "wall_clock_s": record.wall_clock_s}
    (directory / f"{stem}{TIMING_SUFFIX}").write_text(json.dumps(timing) + "\n", encoding="utf-8")
    return path


def write_records(records: list[RunRecord], out: Path) -> list[Path]:
    return [write_record(record, out / RECORDS_DIR) for record in records]


def record_paths(directory: Path) -> list[Path]:
    """RunRecord candidates, sorted by name; accepts an output dir or its records dir."""
    if (directory / RECORDS_DIR).is_dir():
        directory = directory / RECORDS_DIR
    if not directory.is_dir():
        raise HarnessError(f"{directory} is not a directory")
    return sorted(
        p for p in directory.glob("*.json") if not p.name.endswith(TIMING_SUFFIX)
    )


def load_records(directory: Path) -> tuple[list[RunRecord], list[tuple[str, str]]]:
    """Parse every record; corrupt files are skipped and returned as (name, reason)."""
    records: list[RunRecord] = []
    skipped: list[tuple[str, str]] = []
    for path in record_paths(directory):
        try:
            records.append(RunRecord.from_path(path))
        except (ValidationError, ValueError, OSError) as e:
            reason = str(e).splitlines()[0]
            logging.warning(f"Skipping corrupt record {path.name}: {reason}")
            skipped.append((path.name, reason))
    return records, skipped


def write_speed_report(report: SpeedReport, out: Path) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / REPORT_FILE
    path.write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")
    return path


def write_scenario_data(datasets: dict[str, Dataset], out: Path, seed: int) -> list[Path]:
    directory = out / DATA_DIR / f"seed{seed}"
    paths = []
    for split, dataset in datasets.items():
        path = directory / f"{split}.csv"
        write_dataset_csv(dataset, path)
        paths.append(path)
    logging.info(f"Wrote {len(paths)} dataset files to {directory}")
    return paths


# ---------- Old phase ----------


class OldPhaseMeta(BaseModel):
    model_config = ConfigDict(extra="forbid")

    schema_version: Literal["old_phase.v1"] = "old_phase.v1"
    fingerprint: str
    seed: int
    learning_speed_epochs: int
    has_learning_speeds: bool


@dataclass
class OldPhaseArtifact:
    """The sunk cost: a trained old model plus what was recorded while training it."""

    fingerprint: str
    seed: int
    params: ParamSet
    learning_speeds: LearningSpeedTable | None = None
    correctness: CorrectnessMatrix | None = None
    record: RunRecord | None = None


def old_phase_dir(root: Path, seed: int) -> Path:
    return root / f"seed{seed}"


def save_old_phase(artifact: OldPhaseArtifact, root: Path) -> Path:
    directory = old_phase_dir(root, artifact.seed)
    directory.mkdir(parents=True, exist_ok=True)
    artifact.params.save(directory / "params.npz")
    if artifact.learning_speeds is not None:
        artifact.learning_speeds.to_csv(directory / "learning_speed.csv")
    if artifact.correctness is not None:
        artifact.correctness.to_csv(directory / "learning_order.csv")
    if artifact.record is not None:
        write_record(artifact.record, directory)
    meta = OldPhaseMeta(
        fingerprint=artifact.fingerprint,
        seed=artifact.seed,
        learning_speed_epochs=artifact.correctness.epochs if artifact.correctness else 0,
        has_learning_speeds=artifact.learning_speeds is not None,
    )
    # meta last: its presence marks a complete artifact
    (directory / "meta.json").write_text(meta.model_dump_json(indent=2) + "\n", encoding="utf-8")
    return directory


def load_old_phase(root: Path, seed: int, fingerprint: str) -> OldPhaseArtifact | None:
    """The cached artifact for this seed, or None if absent, stale or unreadable."""
    directory = old_phase_dir(root, seed)
    meta_path = directory / "meta.json"
    if not meta_path.exists():
        return None
    try:
        meta = OldPhaseMeta.model_validate_json(meta_path.read_text(encoding="utf-8"))
        if meta.fingerprint != fingerprint:
            logging.info(f"Old phase for seed {seed} is stale; retraining")
            return None
        params = ParamSet.load(directory / "params.npz")
        table = None
        if meta.has_learning_speeds:
            table = LearningSpeedTable.from_csv(directory / "learning_speed.csv")
    except (ValidationError, LearningSpeedError, ValueError, OSError) as e:
        logging.warning(f"Ignoring unreadable old phase for seed {seed}: {e}")
        return None
    logging.info(f"Reusing old phase for seed {seed} from {directory}")
    return OldPhaseArtifact(
        fingerprint=fingerprint, seed=seed, params=params, learning_speeds=table
    )
