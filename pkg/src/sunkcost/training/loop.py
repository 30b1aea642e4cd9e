"""
Instrumented training loop.

One run: sample a batch, take loss and gradient, step the optimizer at
lr_at(t - 1). Every `eval_every` iterations and at the last iteration the
combined and per-origin test accuracies and per-origin mean gradient norms are
recorded. An epoch is ceil(|train| / batch_size) iterations; learning-speed
correctness columns are taken at epoch boundaries.
"""

from __future__ import annotations

import logging
import math
import time
from contextlib import nullcontext
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from sunkcost.core.network import loss_and_grad, per_sample_grad_norms, predict
from sunkcost.core.params import ParamSet
from sunkcost.data.synthetic import Dataset, DatasetError, Origin
from sunkcost.models.records import RunRecord, RunStatus
from sunkcost.models.specs import ObjectiveMode, SamplerMode, TrainingPlan
from sunkcost.observability import TrainingTelemetry
from sunkcost.sampling.learning_speed import (
    CorrectnessMatrix,
    LearningSpeedTable,
    record_learning_speed,
)
from sunkcost.sampling.samplers import BatchSampler, SamplerError
from sunkcost.training.initialization import initial_params
from sunkcost.training.optimizers import init_optimizer, optimizer_step
from sunkcost.training.schedulers import lr_at

# rng streams derived from the run seed
SAMPLER_STREAM = 11
PROBE_STREAM = 12


@dataclass
class TrainingData:
    train: Dataset
    test: Dataset
    lineage: str = ""  # fingerprint of the run that produced the starting parameters

    def __post_init__(self):
        if len(self.test) == 0:
            raise DatasetError("evaluation needs a nonempty test set")
        if len(self.train) and self.train.dimension != self.test.dimension:
            raise DatasetError("train and test feature dimensions differ")

    def fingerprint(self) -> str:
        return f"{self.train.fingerprint()}:{self.test.fingerprint()}:{self.lineage}"


@dataclass
class TrainingOutcome:
    record: RunRecord
    params: ParamSet
    correctness: CorrectnessMatrix | None = None
    learning_speeds: LearningSpeedTable | None = None


def epoch_length(train_size: int, batch_size: int) -> int:
    return max(1, math.ceil(train_size / batch_size))


def _accuracy(
    params: ParamSet, data: Dataset, mask: npt.NDArray[np.bool_] | None = None
) -> float | None:
    if mask is not None:
        if not mask.any():
            return None
        data = data.subset(mask)
    return float(np.mean(predict(params, data.features) == data.labels))


def _correct(params: ParamSet, data: Dataset) -> npt.NDArray[np.bool_]:
    return predict(params, data.features) == data.labels


def _probe(train: Dataset, origin: Origin, size: int, rng: np.random.Generator) -> Dataset | None:
    rows = np.flatnonzero(train.origin_mask(origin))
    if rows.size == 0:
        return None
    if rows.size > size:
        rows = np.sort(rng.choice(rows, size=size, replace=False))
    return train.subset(rows)


def _mean_grad_norm(params: ParamSet, probe: Dataset | None) -> float | None:
    if probe is None:
        return None
    return float(per_sample_grad_norms(params, probe.features, probe.labels).mean())


class _Recorder:
    """Accumulates the curves of one run."""

    def __init__(self, params: ParamSet, test: Dataset, probes: dict[Origin, Dataset | None]):
        self.test = test
        self.probes = probes
        self.old_mask = test.origin_mask(Origin.OLD)
        self.new_mask = test.origin_mask(Origin.NEW)
        self.initial = self._accuracies(params)
        self.eval_iterations: list[int] = []
        self.accuracy: list[float] = []
        self.accuracy_old: list[float | None] = []
        self.accuracy_new: list[float | None] = []
        self.grad_iterations: list[int] = [0]
        self.grad_old: list[float | None] = [_mean_grad_norm(params, probes[Origin.OLD])]
        self.grad_new: list[float | None] = [_mean_grad_norm(params, probes[Origin.NEW])]

    def _accuracies(self, params: ParamSet) -> tuple[float, float | None, float | None]:
        return (
            _accuracy(params, self.test),
            _accuracy(params, self.test, self.old_mask),
            _accuracy(params, self.test, self.new_mask),
        )

    def evaluate(self, iteration: int, params: ParamSet) -> float:
        combined, old, new = self._accuracies(params)
        self.eval_iterations.append(iteration)
        self.accuracy.append(combined)
        self.accuracy_old.append(old)
        self.accuracy_new.append(new)
        if iteration > 0:
            self.grad_iterations.append(iteration)
            self.grad_old.append(_mean_grad_norm(params, self.probes[Origin.OLD]))
            self.grad_new.append(_mean_grad_norm(params, self.probes[Origin.NEW]))
        return combined


def train_model(
    plan: TrainingPlan,
    data: TrainingData,
    old_params: ParamSet | None = None,
    telemetry: TrainingTelemetry | None = None,
    components: dict[str, str] | None = None,
) -> TrainingOutcome:
    """Run one plan and return its record, final parameters and learning speeds."""
    started = time.perf_counter()
    train_set, test_set = data.train, data.test
    if plan.iterations > 0 and len(train_set) == 0:
        raise DatasetError("cannot train on an empty training set")
    if len(train_set) and train_set.dimension != plan.network.input_width:
        raise DatasetError(
            f"data dimension {train_set.dimension} does not match network input "
            f"{plan.network.input_width}"
        )

    params = initial_params(plan.init, plan.network, plan.seed, old_params)
    objective = plan.objective
    if objective.mode == ObjectiveMode.L2_INIT and objective.reference is None:
        objective = objective.anchored_at(params)

    sampler_spec = plan.sampler
    pending_table = (
        sampler_spec.mode == SamplerMode.EASY_HARD and sampler_spec.learning_speeds is None
    )
    if pending_table and sampler_spec.recording_epochs == 0:
        raise SamplerError(
            f"arm {plan.arm!r} uses easy_hard sampling without a learning-speed table "
            "and without recording epochs"
        )

    probe_rng = np.random.default_rng([plan.seed, PROBE_STREAM])
    probes = {origin: _probe(train_set, origin, plan.probe_size, probe_rng) for origin in Origin}
    recorder = _Recorder(params, test_set, probes)

    sampler_rng = np.random.default_rng([plan.seed, SAMPLER_STREAM])
    batch_sampler: BatchSampler | None = None
    if plan.iterations > 0:
        if pending_table:
            warmup = sampler_spec.model_copy(update={"mode": SamplerMode.PROPORTIONAL})
            batch_sampler = BatchSampler(warmup, train_set)
        else:
            batch_sampler = BatchSampler(sampler_spec, train_set)

    epoch = epoch_length(len(train_set), plan.batch_size)
    old_train = train_set.subset(train_set.origin_mask(Origin.OLD)) if pending_table else None
    recorded_columns: list[npt.NDArray[np.bool_]] = []
    warmup_columns: list[npt.NDArray[np.bool_]] = []

    optimizer = init_optimizer(plan.optimizer, params)
    losses: list[float] = []
    status, diagnostic = RunStatus.COMPLETED, None
    logging.info(
        f"Training {plan.arm} seed={plan.seed}: {plan.iterations} iterations, "
        f"{len(train_set)} train / {len(test_set)} test samples"
    )

    span = telemetry.span("train", arm=plan.arm, seed=plan.seed) if telemetry else nullcontext()
    with span:
        for t in range(1, plan.iterations + 1):
            rows = batch_sampler.draw(plan.batch_size, sampler_rng)
            loss, grads = loss_and_grad(
                params, train_set.features[rows], train_set.labels[rows], objective
            )
            if not math.isfinite(loss) or not grads.all_finite():
                status = RunStatus.DIVERGED
                diagnostic = f"non-finite loss or gradient at iteration {t}"
                break
            lr = lr_at(plan.scheduler, t - 1)
            stepped, optimizer = optimizer_step(optimizer, params, grads, lr)
            if not stepped.all_finite():
                status = RunStatus.DIVERGED
                diagnostic = f"non-finite parameters after iteration {t}"
                break
            params = stepped
            losses.append(loss)

            if t % epoch == 0:
                if plan.record_learning_speed:
                    recorded_columns.append(_correct(params, train_set))
                if pending_table:
                    warmup_columns.append(_correct(params, old_train))
                    if len(warmup_columns) == sampler_spec.recording_epochs:
                        table = record_learning_speed(
                            CorrectnessMatrix.from_columns(old_train.ids, warmup_columns)
                        )
                        batch_sampler = BatchSampler(sampler_spec.with_table(table), train_set)
                        pending_table = False
                        logging.debug(f"{plan.arm}: switched to easy/hard sampling at {t}")

            if t % plan.eval_every == 0 or t == plan.iterations:
                accuracy = recorder.evaluate(t, params)
                logging.debug(
                    f"{plan.arm} seed={plan.seed} t={t} loss={loss:.4f} acc={accuracy:.4f}"
                )
                if telemetry:
                    telemetry.record_loss(plan.arm, loss)
    if plan.iterations == 0:
        recorder.evaluate(0, params)
    if status == RunStatus.DIVERGED:
        if losses and recorder.eval_iterations[-1:] != [len(losses)]:
            recorder.evaluate(len(losses), params)
        logging.error(f"{plan.arm} seed={plan.seed} diverged: {diagnostic}")

    correctness = None
    table = None
    if plan.record_learning_speed and recorded_columns:
        correctness = CorrectnessMatrix.from_columns(train_set.ids, recorded_columns)
        table = record_learning_speed(correctness)

    elapsed = time.perf_counter() - started
    initial, initial_old, initial_new = recorder.initial
    record = RunRecord(
        arm=plan.arm,
        seed=plan.seed,
        fingerprint=plan.fingerprint(data.fingerprint()),
        components=components or {},
        config=plan.model_dump(mode="json"),
        status=status,
        diagnostic=diagnostic,
        iterations=plan.iterations,
        iterations_completed=len(losses),
        eval_every=plan.eval_every,
        initial_accuracy=initial,
        initial_accuracy_old=initial_old,
        initial_accuracy_new=initial_new,
        eval_iterations=recorder.eval_iterations,
        test_accuracy=recorder.accuracy,
        test_accuracy_old=recorder.accuracy_old,
        test_accuracy_new=recorder.accuracy_new,
        train_loss=losses,
        grad_iterations=recorder.grad_iterations,
        grad_norm_old=recorder.grad_old,
        grad_norm_new=recorder.grad_new,
        learning_speed_epochs=max(len(recorded_columns), len(warmup_columns)),
        wall_clock_s=elapsed,
    )
    if telemetry:
        telemetry.record_iterations(plan.arm, len(losses))
        telemetry.record_run(plan.arm, status.value, elapsed)
    final = record.final_accuracy
    logging.info(
        f"Finished {plan.arm} seed={plan.seed}: status={status.value} "
        f"final_accuracy={final if final is None else round(final, 4)} wall_clock={elapsed:.2f}s"
    )
    return TrainingOutcome(
        record=record, params=params, correctness=correctness, learning_speeds=table
    )


def train(
    plan: TrainingPlan,
    data: TrainingData,
    old_params: ParamSet | None = None,
    telemetry: TrainingTelemetry | None = None,
) -> RunRecord:
    return train_model(plan, data, old_params, telemetry).record
