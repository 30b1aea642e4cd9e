"""
Multi-task sequences with a cumulative cost ledger.

The base task is trained once from scratch; that model and its cost belong to
both strategies. Every later task adds one class group: the continuous model
picks up where it left off (using learning speeds recorded on its previous
task), and a scratch reference retrains on everything seen so far with the full
scheduler. Accuracy is always measured on the test samples of every class.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from contextlib import nullcontext
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from sunkcost.data.synthetic import Dataset, Origin, gen_gaussian_classes, merge, split_by_class
from sunkcost.harness.persistence import write_records
from sunkcost.harness.scenario import arm_plan
from sunkcost.metrics.speed import LearningCurve, relative_speedup, scratch_target, speed
from sunkcost.models.records import RunRecord
from sunkcost.models.specs import ArmConfig, SamplerMode, SequenceConfig, TargetMode
from sunkcost.observability import TrainingTelemetry
from sunkcost.training.loop import TrainingData, train_model

LEDGER_FILE = "sequence_ledger_seed{seed}.json"


class TaskEntry(BaseModel):
    model_config = ConfigDict(extra="forbid")

    task: int
    classes_seen: int
    max_possible_accuracy: float = Field(description="Share of all classes seen so far.")
    continuous_iterations: int
    scratch_iterations: int
    a_scratch: float | None
    continuous_to_match: int | None = Field(
        description="Iterations the continuous model needed to reach a_scratch; null = never."
    )
    l100: float | None
    continuous_final_accuracy: float | None
    scratch_final_accuracy: float | None
    cumulative_continuous: int
    cumulative_scratch: int
    cumulative_continuous_to_match: int | None


class SequenceLedger(BaseModel):
    model_config = ConfigDict(extra="forbid")

    schema_version: Literal["sequence_ledger.v1"] = "sequence_ledger.v1"
    seed: int
    method_arm: str
    reference_arm: str
    target_mode: TargetMode
    tasks: list[TaskEntry]
    notes: list[str] = Field(default_factory=list)

    @property
    def continuous_total(self) -> int:
        return self.tasks[-1].cumulative_continuous if self.tasks else 0

    @property
    def scratch_total(self) -> int:
        return self.tasks[-1].cumulative_scratch if self.tasks else 0

    @property
    def continuous_cheaper(self) -> bool | None:
        """Whether matching every scratch reference cost less than retraining them all."""
        if not self.tasks or self.tasks[-1].cumulative_continuous_to_match is None:
            return None
        return self.tasks[-1].cumulative_continuous_to_match < self.scratch_total


@dataclass
class SequenceResult:
    records: list[RunRecord]
    ledgers: list[SequenceLedger]
    output_dir: Path


def class_groups(config: SequenceConfig) -> list[int]:
    """Base, increments, and a trailing unused group so the sizes cover every class."""
    groups = [config.base_classes, *config.increments]
    leftover = config.generator.classes - sum(groups)
    return groups + [leftover] if leftover else groups


def _union(datasets: list[Dataset]) -> Dataset:
    combined = datasets[0]
    for extra in datasets[1:]:
        combined = merge(combined, extra)
    return combined.tagged(Origin.OLD)


def task_data(
    groups: list[tuple[Dataset, Dataset]], task: int, full_test: Dataset, lineage: str = ""
) -> TrainingData:
    """Train on groups 0..task, the last one tagged new; test on every class."""
    if task == 0:
        train = groups[0][0].tagged(Origin.OLD)
    else:
        train = merge(_union([g[0] for g in groups[:task]]), groups[task][0])
    test = Dataset(
        ids=full_test.ids,
        features=full_test.features,
        labels=full_test.labels,
        is_new=np.isin(full_test.ids, groups[task][1].ids),
        class_count=full_test.class_count,
        role=full_test.role,
    )
    return TrainingData(train=train, test=test, lineage=lineage)


def _renamed(arm: ArmConfig, task: int) -> ArmConfig:
    return arm.model_copy(update={"name": f"task{task}:{arm.name}"})


def _curve(record: RunRecord) -> LearningCurve | None:
    return LearningCurve.from_record(record) if record.eval_iterations else None


def _entry(
    task: int,
    classes_seen: int,
    class_count: int,
    continuous: RunRecord,
    scratch: RunRecord,
    target_mode: TargetMode,
    previous: TaskEntry | None,
) -> TaskEntry:
    cont_curve, ref_curve = _curve(continuous), _curve(scratch)
    a_scratch = to_match = l100 = None
    if ref_curve is not None:
        a_scratch = scratch_target(ref_curve, target_mode)
        if cont_curve is not None:
            to_match = speed(cont_curve, a_scratch)
            l100 = relative_speedup(cont_curve, ref_curve, a_scratch, 100.0)

    if previous is None:
        # the base model is shared: its full cost is counted once for each strategy
        cumulative_cont = continuous.iterations_completed
        cumulative_scratch = scratch.iterations_completed
        cumulative_match: int | None = continuous.iterations_completed
    else:
        cumulative_cont = previous.cumulative_continuous + continuous.iterations_completed
        cumulative_scratch = previous.cumulative_scratch + scratch.iterations_completed
        prior = previous.cumulative_continuous_to_match
        cumulative_match = None if prior is None or to_match is None else prior + to_match

    return TaskEntry(
        task=task,
        classes_seen=classes_seen,
        max_possible_accuracy=classes_seen / class_count,
        continuous_iterations=continuous.iterations_completed,
        scratch_iterations=scratch.iterations_completed,
        a_scratch=a_scratch,
        continuous_to_match=to_match,
        l100=l100,
        continuous_final_accuracy=continuous.final_accuracy,
        scratch_final_accuracy=scratch.final_accuracy,
        cumulative_continuous=cumulative_cont,
        cumulative_scratch=cumulative_scratch,
        cumulative_continuous_to_match=cumulative_match,
    )


def run_sequence_seed(
    config: SequenceConfig, seed: int, telemetry: TrainingTelemetry | None = None
) -> tuple[list[RunRecord], SequenceLedger]:
    train, test = gen_gaussian_classes(config.generator)
    groups = split_by_class(train, test, class_groups(config), seed)
    full_test = _union([g[1] for g in groups])
    class_count = config.generator.classes
    n_tasks = 1 + len(config.increments)

    records: list[RunRecord] = []
    entries: list[TaskEntry] = []
    notes: list[str] = []
    params = None
    table = None
    lineage = ""
    classes_seen = 0

    for task in range(n_tasks):
        classes_seen += class_groups(config)[task]
        span = (
            telemetry.span("sequence_task", task=task, seed=seed) if telemetry else nullcontext()
        )
        with span:
            if task == 0:
                data = task_data(groups, 0, full_test)
                plan = arm_plan(
                    config, _renamed(config.reference, 0), data, seed,
                    config.iterations_per_task, record_learning_speed=True,
                )
                outcome = train_model(plan, data, telemetry=telemetry)
                continuous = scratch = outcome.record
                records.append(outcome.record)
            else:
                data = task_data(groups, task, full_test, lineage)
                method = _renamed(config.method, task)
                if table is None and method.sampler.mode == SamplerMode.EASY_HARD:
                    notes.append(f"task {task}: no learning speeds from task {task - 1}, "
                                 "recording during the task instead")
                plan = arm_plan(
                    config, method, data, seed, config.iterations_per_task,
                    learning_speeds=table, record_learning_speed=True,
                )
                outcome = train_model(plan, data, params, telemetry, method.components())
                reference = _renamed(config.reference, task)
                ref_plan = arm_plan(config, reference, data, seed, config.iterations_per_task)
                scratch = train_model(
                    ref_plan, data, telemetry=telemetry, components=reference.components()
                ).record
                continuous = outcome.record
                records.extend([continuous, scratch])

        params, table, lineage = outcome.params, outcome.learning_speeds, continuous.fingerprint
        entry = _entry(
            task, classes_seen, class_count, continuous, scratch, config.target_mode,
            entries[-1] if entries else None,
        )
        entries.append(entry)
        logging.info(
            f"seed={seed} task={task}: classes_seen={classes_seen} l100={entry.l100} "
            f"cumulative continuous/scratch={entry.cumulative_continuous_to_match}/"
            f"{entry.cumulative_scratch}"
        )

    notes.append(
        f"scratch references reuse the shared defaults and arm {config.reference.name!r}"
    )
    ledger = SequenceLedger(
        seed=seed,
        method_arm=config.method.name,
        reference_arm=config.reference.name,
        target_mode=config.target_mode,
        tasks=entries,
        notes=notes,
    )
    return records, ledger


def write_ledger(ledger: SequenceLedger, out: Path) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / LEDGER_FILE.format(seed=ledger.seed)
    path.write_text(ledger.model_dump_json(indent=2) + "\n", encoding="utf-8")
    return path


def run_sequence(
    config: SequenceConfig,
    workers: int = 1,
    telemetry: TrainingTelemetry | None = None,
    persist: bool = True,
) -> SequenceResult:
    out = Path(config.output_dir)
    logging.info(
        f"Sequence {config.base_classes}+{config.increments}: method={config.method.name}, "
        f"{len(config.seeds)} seeds"
    )
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(
                pool.map(run_sequence_seed, [config] * len(config.seeds), config.seeds)
            )
        if telemetry:
            for seed_records, _ in results:
                for record in seed_records:
                    telemetry.record_iterations(record.arm, record.iterations_completed)
                    telemetry.record_run(record.arm, record.status.value, record.wall_clock_s)
    else:
        results = [run_sequence_seed(config, seed, telemetry) for seed in config.seeds]

    records = [record for seed_records, _ in results for record in seed_records]
    ledgers = [ledger for _, ledger in results]
    if persist:
        write_records(records, out)
        for ledger in ledgers:
            write_ledger(ledger, out)
    return SequenceResult(records=records, ledgers=ledgers, output_dir=out)
