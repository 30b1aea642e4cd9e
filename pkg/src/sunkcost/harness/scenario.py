"""
Two-phase scenario runner.

Phase 1 trains the old model on the old data once per seed (recording learning
speeds) and caches it. Phase 2 trains every arm on old + new data, continuous
arms starting from the cached old model and scratch arms from random weights.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from sunkcost.core.params import ParamSet
from sunkcost.data.synthetic import (
    Dataset,
    Origin,
    apply_domain_shift,
    gen_gaussian_classes,
    merge,
    split_by_class,
)
from sunkcost.harness.persistence import (
    HarnessError,
    OldPhaseArtifact,
    load_old_phase,
    save_old_phase,
    write_records,
    write_scenario_data,
    write_speed_report,
)
from sunkcost.metrics.aggregate import aggregate
from sunkcost.models.records import RunRecord, SpeedReport
from sunkcost.models.specs import (
    ArmConfig,
    ExperimentConfig,
    InitMode,
    InitSpec,
    ObjectiveMode,
    ObjectiveSpec,
    ParamSource,
    SamplerMode,
    SamplerSpec,
    ScenarioKind,
    ScenarioSpec,
    TrainingDefaults,
    TrainingPlan,
)
from sunkcost.observability import TrainingTelemetry
from sunkcost.sampling.learning_speed import LearningSpeedTable
from sunkcost.training.loop import TrainingData, train_model

SHIFT_SPLIT_STREAM = 21


@dataclass
class Scenario:
    old_train: Dataset
    old_test: Dataset
    new_train: Dataset
    new_test: Dataset

    @property
    def class_count(self) -> int:
        return self.old_train.class_count

    @property
    def dimension(self) -> int:
        return self.old_train.dimension

    def datasets(self) -> dict[str, Dataset]:
        return {
            "old_train": self.old_train,
            "old_test": self.old_test,
            "new_train": self.new_train,
            "new_test": self.new_test,
        }

    def old_data(self) -> TrainingData:
        return TrainingData(train=self.old_train, test=self.old_test)

    def merged_data(self, lineage: str = "") -> TrainingData:
        return TrainingData(
            train=merge(self.old_train, self.new_train),
            test=merge(self.old_test, self.new_test),
            lineage=lineage,
        )


def build_scenario(spec: ScenarioSpec, seed: int) -> Scenario:
    """Old/new split for one seed; the generated pool depends only on the generator seed."""
    train, test = gen_gaussian_classes(spec.generator)
    if spec.kind == ScenarioKind.CLASS_INCREMENTAL:
        (old_train, old_test), (new_train, new_test) = split_by_class(
            train, test, spec.class_splits, seed
        )
    else:
        rng = np.random.default_rng([seed, SHIFT_SPLIT_STREAM])
        shifted = np.zeros(len(train), dtype=bool)
        for label in range(train.class_count):
            rows = np.flatnonzero(train.labels == label)
            take = max(1, round(spec.shift.new_fraction * rows.size))
            shifted[rng.choice(rows, size=take, replace=False)] = True
        old_train = train.subset(~shifted)
        old_test = test
        # the shift transform belongs to the scenario, not the run seed
        new_train = apply_domain_shift(train.subset(shifted), spec.shift, spec.generator.seed + 1)
        new_test = apply_domain_shift(test, spec.shift, spec.generator.seed + 1)
    return Scenario(
        old_train=old_train.tagged(Origin.OLD),
        old_test=old_test.tagged(Origin.OLD),
        new_train=new_train.tagged(Origin.NEW),
        new_test=new_test.tagged(Origin.NEW),
    )


# ---------- Arms ----------

_ASPECTS = ("sp", "l2init", "data", "sched")

# rows of the four-aspect ablation grid: none, each alone, the pairs and triple
# without the scheduler, and everything
_GRID = (
    (),
    ("sp",),
    ("l2init",),
    ("data",),
    ("sched",),
    ("sp", "l2init"),
    ("sp", "data"),
    ("l2init", "data"),
    ("sp", "l2init", "data"),
    ("sp", "l2init", "data", "sched"),
)


def arm_from_aspects(continuous: bool, aspects: tuple[str, ...], multiplier: float) -> ArmConfig:
    unknown = set(aspects) - set(_ASPECTS)
    if unknown:
        raise HarnessError(f"unknown aspects {sorted(unknown)}")
    start = "continuous" if continuous else "scratch"
    if "sp" in aspects:
        source = ParamSource.OLD if continuous else ParamSource.RANDOM
        init = InitSpec(mode=InitMode.SHRINK_PERTURB, source=source)
    else:
        init = InitSpec(mode=InitMode.NAIVE if continuous else InitMode.SCRATCH)
    reg = ObjectiveMode.L2_INIT if "l2init" in aspects else ObjectiveMode.NONE
    data = SamplerMode.EASY_HARD if "data" in aspects else SamplerMode.PROPORTIONAL
    tokens = [f"x{multiplier:g}" if a == "sched" else a for a in aspects]
    return ArmConfig(
        name="+".join([start, *tokens]),
        init=init,
        objective=ObjectiveSpec(mode=reg),
        sampler=SamplerSpec(mode=data),
        scheduler_multiplier=multiplier if "sched" in aspects else 1.0,
    )


def ablation_arms(multiplier: float = 0.25) -> list[ArmConfig]:
    """10 continuous + 10 scratch arms over initialization, regularization, data, scheduler."""
    return [
        arm_from_aspects(continuous, aspects, multiplier)
        for continuous in (True, False)
        for aspects in _GRID
    ]


def default_experiment(**overrides) -> ExperimentConfig:
    """Desk scenario; arms default to the plain scratch, naive and combined arms."""
    overrides.setdefault("arms", [
        arm_from_aspects(False, (), 0.25),
        arm_from_aspects(True, (), 0.25),
        arm_from_aspects(True, ("sp", "l2init", "data", "sched"), 0.25),
    ])
    return ExperimentConfig(**overrides)


# ---------- Plans ----------


def old_phase_plan(config: ExperimentConfig, scenario: Scenario, seed: int) -> TrainingPlan:
    return TrainingPlan(
        arm="old_phase",
        network=config.network_for(scenario.dimension, scenario.class_count),
        scheduler=config.scheduler_for(config.old_phase.iterations),
        optimizer=config.optimizer,
        iterations=config.old_phase.iterations,
        eval_every=config.cadence_for(len(scenario.old_train)),
        batch_size=config.batch_size,
        probe_size=config.probe_size,
        record_learning_speed=config.old_phase.record_learning_speeds,
        seed=seed,
    )


def arm_plan(
    defaults: TrainingDefaults,
    arm: ArmConfig,
    data: TrainingData,
    seed: int,
    iterations: int,
    learning_speeds: LearningSpeedTable | None = None,
    record_learning_speed: bool = False,
) -> TrainingPlan:
    """Plan for one arm on merged data; scheduler horizon is `iterations` times the multiplier."""
    sampler = arm.sampler
    if sampler.mode == SamplerMode.EASY_HARD:
        if arm.is_continuous and learning_speeds is not None:
            sampler = sampler.with_table(learning_speeds)
        elif sampler.recording_epochs == 0:
            epochs = defaults.scratch_recording_epochs
            sampler = sampler.model_copy(update={"recording_epochs": epochs})
    return TrainingPlan(
        arm=arm.name,
        network=defaults.network_for(data.train.dimension, data.train.class_count),
        init=arm.init,
        objective=arm.objective,
        sampler=sampler,
        scheduler=defaults.scheduler_for(iterations, arm.scheduler_multiplier),
        optimizer=defaults.optimizer,
        iterations=iterations,
        eval_every=defaults.cadence_for(len(data.train)),
        batch_size=defaults.batch_size,
        probe_size=defaults.probe_size,
        record_learning_speed=record_learning_speed,
        seed=seed,
    )


def validate_arms(config: ExperimentConfig) -> None:
    """Reject setups that could only fail after expensive training."""
    for arm in config.arms:
        easy_hard = arm.sampler.mode == SamplerMode.EASY_HARD
        if easy_hard and arm.is_continuous and not config.old_phase.record_learning_speeds:
            raise HarnessError(
                f"arm {arm.name!r} needs learning speeds but the old phase does not record them"
            )
        recording = arm.sampler.recording_epochs or config.scratch_recording_epochs
        if easy_hard and not arm.is_continuous and recording < 1:
            raise HarnessError(f"scratch arm {arm.name!r} has no learning-speed recording epochs")


def old_phase_root(config: ExperimentConfig) -> Path:
    return Path(config.old_phase_dir or Path(config.output_dir) / "old_phase")


# ---------- Execution ----------


def run_old_phase(
    config: ExperimentConfig,
    seed: int,
    telemetry: TrainingTelemetry | None = None,
) -> OldPhaseArtifact:
    """Train (or reuse) the old model for one seed."""
    scenario = build_scenario(config.scenario, seed)
    plan = old_phase_plan(config, scenario, seed)
    data = scenario.old_data()
    fingerprint = plan.fingerprint(data.fingerprint())
    root = old_phase_root(config)
    cached = load_old_phase(root, seed, fingerprint)
    if cached is not None:
        return cached
    outcome = train_model(plan, data, telemetry=telemetry, components={"start": "old_phase"})
    artifact = OldPhaseArtifact(
        fingerprint=fingerprint,
        seed=seed,
        params=outcome.params,
        learning_speeds=outcome.learning_speeds,
        correctness=outcome.correctness,
        record=outcome.record,
    )
    save_old_phase(artifact, root)
    return artifact


def _old_phase_job(config: ExperimentConfig, seed: int) -> str:
    return run_old_phase(config, seed).fingerprint


def run_arm(
    config: ExperimentConfig,
    arm_name: str,
    seed: int,
    telemetry: TrainingTelemetry | None = None,
) -> RunRecord:
    """Phase 2 for one (arm, seed); continuous arms read the cached old phase."""
    arm = config.arm(arm_name)
    scenario = build_scenario(config.scenario, seed)
    old_params: ParamSet | None = None
    table = None
    lineage = ""
    if arm.is_continuous:
        old = run_old_phase(config, seed, telemetry)
        old_params, table, lineage = old.params, old.learning_speeds, old.fingerprint
        if arm.sampler.mode == SamplerMode.EASY_HARD and table is None:
            raise HarnessError(
                f"arm {arm.name!r}: the old phase for seed {seed} recorded no full epoch"
            )
    data = scenario.merged_data(lineage)
    plan = arm_plan(config, arm, data, seed, config.iterations, table)
    return train_model(plan, data, old_params, telemetry, arm.components()).record


@dataclass
class ScenarioResult:
    records: list[RunRecord]
    report: SpeedReport
    output_dir: Path


def run_scenario(
    config: ExperimentConfig,
    workers: int = 1,
    telemetry: TrainingTelemetry | None = None,
    persist: bool = True,
) -> ScenarioResult:
    """Old phase per seed, then every arm for every seed, then the SpeedReport."""
    validate_arms(config)
    out = Path(config.output_dir)
    jobs = [(arm.name, seed) for arm in config.arms for seed in config.seeds]
    needs_old = any(arm.is_continuous for arm in config.arms)
    logging.info(
        f"Scenario {config.scenario.kind.value}: {len(config.arms)} arms x "
        f"{len(config.seeds)} seeds, workers={workers}"
    )

    if workers > 1:
        # telemetry stays in this process; workers report through their records
        with ProcessPoolExecutor(max_workers=workers) as pool:
            if needs_old:
                list(pool.map(_old_phase_job, [config] * len(config.seeds), config.seeds))
            futures = [pool.submit(run_arm, config, arm, seed) for arm, seed in jobs]
            records = [future.result() for future in futures]
        if telemetry:
            for record in records:
                telemetry.record_iterations(record.arm, record.iterations_completed)
                telemetry.record_run(record.arm, record.status.value, record.wall_clock_s)
    else:
        if needs_old:
            for seed in config.seeds:
                run_old_phase(config, seed, telemetry)
        records = [run_arm(config, arm, seed, telemetry) for arm, seed in jobs]

    report = aggregate(records, config.baseline_arm, config.r_values, config.target_mode)
    if persist:
        write_records(records, out)
        write_speed_report(report, out)
        if config.export_data:
            for seed in config.seeds:
                write_scenario_data(build_scenario(config.scenario, seed).datasets(), out, seed)
    return ScenarioResult(records=records, report=report, output_dir=out)
