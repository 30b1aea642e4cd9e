"""Shared fixtures: tiny networks, datasets and desk-scale configs that train in seconds"""
import numpy as np
import pytest

from sunkcost.data.synthetic import Dataset, Role
from sunkcost.harness.scenario import arm_from_aspects, default_experiment
from sunkcost.models.records import RunRecord, RunStatus
from sunkcost.models.specs import GeneratorParams, NetworkSpec, ScenarioSpec


def _dataset(
    n_old: int,
    n_new: int = 0,
    dimension: int = 4,
    classes: int = 3,
    seed: int = 0,
    role: Role = Role.TRAIN,
    id_start: int = 0,
) -> Dataset:
    rng = np.random.default_rng(seed)
    n = n_old + n_new
    return Dataset(
        ids=np.arange(id_start, id_start + n),
        features=rng.normal(size=(n, dimension)),
        labels=rng.integers(0, classes, size=n),
        is_new=np.arange(n) >= n_old,
        class_count=classes,
        role=role,
    )


@pytest.fixture
def make_dataset():
    """Factory for random datasets with the first n_old rows old, the rest new"""
    return _dataset


@pytest.fixture
def tiny_network():
    return NetworkSpec(layer_widths=[4, 5, 3])


@pytest.fixture
def small_generator():
    return GeneratorParams(
        dimension=4,
        classes=4,
        cluster_spread=0.6,
        mean_scale=3.0,
        train_per_class=20,
        test_per_class=5,
        seed=3,
    )


@pytest.fixture
def small_experiment(tmp_path, small_generator):
    """Three-arm class-incremental scenario, two seeds, a few dozen iterations per run"""
    return default_experiment(
        scenario=ScenarioSpec(class_splits=[3, 1], generator=small_generator),
        hidden_widths=[8],
        batch_size=16,
        probe_size=16,
        eval_every=5,
        eta_max=1e-2,
        iterations=30,
        old_phase={"iterations": 30},
        seeds=[0, 1],
        output_dir=str(tmp_path / "runs"),
    )


@pytest.fixture
def combined_arm():
    return arm_from_aspects(True, ("sp", "l2init", "data", "sched"), 0.25)


def _record(
    arm: str,
    seed: int,
    accuracies: list[float],
    iterations: list[int] | None = None,
    status: RunStatus = RunStatus.COMPLETED,
    eval_every: int = 10,
    components: dict[str, str] | None = None,
) -> RunRecord:
    iterations = iterations or [eval_every * (i + 1) for i in range(len(accuracies))]
    n = len(accuracies)
    completed = iterations[-1] if iterations else 0
    return RunRecord(
        arm=arm,
        seed=seed,
        fingerprint=f"{arm}-{seed}",
        components=components or {},
        status=status,
        diagnostic="blew up" if status == RunStatus.DIVERGED else None,
        iterations=max(completed, 1),
        iterations_completed=completed,
        eval_every=eval_every,
        initial_accuracy=0.1,
        eval_iterations=iterations,
        test_accuracy=accuracies,
        test_accuracy_old=[None] * n,
        test_accuracy_new=[None] * n,
        train_loss=[1.0 / (t + 1) for t in range(completed)],
        grad_iterations=[0],
        grad_norm_old=[1.0],
        grad_norm_new=[2.0],
    )


@pytest.fixture
def make_record():
    """Factory for hand-made RunRecords with a given accuracy curve"""
    return _record
