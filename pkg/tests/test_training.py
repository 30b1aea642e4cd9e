"""Tests for initialization rules, schedulers, optimizers and the training loop"""
from unittest.mock import ANY, MagicMock, patch

import numpy as np
import pytest
from pydantic import ValidationError

from sunkcost.core.network import init_params
from sunkcost.core.params import ParamSet, ParamStructureError
from sunkcost.data.synthetic import DatasetError, gen_gaussian_classes, merge, split_by_class
from sunkcost.models.records import RunStatus
from sunkcost.models.specs import (
    InitMode,
    InitSpec,
    NetworkSpec,
    ObjectiveMode,
    ObjectiveSpec,
    OptimizerKind,
    ParamSource,
    SamplerMode,
    SamplerSpec,
    SchedulerFamily,
    SchedulerSpec,
    TrainingPlan,
)
from sunkcost.sampling.samplers import SamplerError
from sunkcost.training.initialization import initial_params, shrink_perturb
from sunkcost.training.loop import TrainingData, epoch_length, train, train_model
from sunkcost.training.optimizers import (
    OptimizerState,
    adam_step,
    init_optimizer,
    optimizer_step,
    sgd_step,
)
from sunkcost.training.schedulers import compressed_milestones, lr_at


def _vector(*values: float) -> ParamSet:
    return ParamSet({"w": np.array(values, dtype=np.float64)})


class TestShrinkPerturb:
    """Test the shrink-and-perturb rule"""

    def test_worked_example(self):
        """Test alpha=0.4, beta=0.001 on [1, -2] and [0.5, 0.5]"""
        out = shrink_perturb(_vector(1.0, -2.0), _vector(0.5, 0.5), 0.4, 0.001)
        np.testing.assert_allclose(out["w"], [0.4005, -0.7995], rtol=0, atol=1e-15)

    def test_identity_recovers_naive(self, tiny_network):
        """Test alpha=1, beta=0 returns the old parameters bit for bit"""
        old = init_params(tiny_network, 0)
        out = shrink_perturb(old, init_params(tiny_network, 1), 1.0, 0.0)
        assert out.bit_equal(old)
        assert out is not old

    def test_is_linear_in_both_inputs(self, tiny_network):
        """Test the result is alpha * old + beta * random on every tensor, biases included"""
        rng = np.random.default_rng(0)
        old = init_params(tiny_network, 2).map(lambda v: v + rng.normal(size=v.shape))
        random = init_params(tiny_network, 3)
        out = shrink_perturb(old, random, 0.3, 0.05)
        for name in old:
            np.testing.assert_allclose(out[name], 0.3 * old[name] + 0.05 * random[name])

    def test_structure_mismatch_rejected(self):
        """Test parameter sets must match"""
        with pytest.raises(ParamStructureError):
            shrink_perturb(_vector(1.0), _vector(1.0, 2.0), 0.4, 0.001)

    def test_out_of_range_factors_rejected(self):
        """Test alpha outside [0, 1] or negative beta raise"""
        with pytest.raises(ValueError):
            shrink_perturb(_vector(1.0), _vector(1.0), 1.5, 0.0)
        with pytest.raises(ValueError):
            shrink_perturb(_vector(1.0), _vector(1.0), 0.5, -0.1)


class TestInitialParams:
    """Test phase-start parameters per initialization mode"""

    def test_scratch_ignores_old(self, tiny_network):
        """Test scratch draws fresh weights from the run seed"""
        old = init_params(tiny_network, 100)
        out = initial_params(InitSpec(mode=InitMode.SCRATCH), tiny_network, 4, old)
        assert out.bit_equal(init_params(tiny_network, 8))

    def test_naive_copies_old(self, tiny_network):
        """Test naive starts from an independent copy of the old model"""
        old = init_params(tiny_network, 100)
        out = initial_params(InitSpec(mode=InitMode.NAIVE), tiny_network, 0, old)
        assert out.bit_equal(old)
        assert out is not old

    def test_naive_draws_no_random_parameters(self, tiny_network):
        """Test the naive structure check reads shapes from the network spec"""
        old = init_params(tiny_network, 100)
        with patch("sunkcost.training.initialization.init_params") as draw:
            initial_params(InitSpec(mode=InitMode.NAIVE), tiny_network, 0, old)
        draw.assert_not_called()

    def test_naive_without_old_rejected(self, tiny_network):
        """Test warm starts from the old model need it"""
        with pytest.raises(ParamStructureError):
            initial_params(InitSpec(mode=InitMode.NAIVE), tiny_network, 0)

    def test_naive_with_foreign_structure_rejected(self, tiny_network):
        """Test an old model of another architecture is refused"""
        other = init_params(NetworkSpec(layer_widths=[4, 6, 3]), 0)
        with pytest.raises(ParamStructureError):
            initial_params(InitSpec(mode=InitMode.NAIVE), tiny_network, 0, other)

    def test_shrink_perturb_uses_perturbation_stream(self, tiny_network):
        """Test the perturbation comes from the seed's second stream"""
        old = init_params(tiny_network, 100)
        spec = InitSpec(mode=InitMode.SHRINK_PERTURB, alpha=0.4, beta=0.001)
        out = initial_params(spec, tiny_network, 3, old)
        expected = old.combine(init_params(tiny_network, 7), 0.4, 0.001)
        assert out.bit_equal(expected)

    def test_explicit_random_seed(self, tiny_network):
        """Test random_seed overrides the derived perturbation seed"""
        old = init_params(tiny_network, 100)
        spec = InitSpec(mode=InitMode.SHRINK_PERTURB, random_seed=42)
        out = initial_params(spec, tiny_network, 3, old)
        assert out.bit_equal(old.combine(init_params(tiny_network, 42), 0.4, 0.001))

    def test_random_source_for_scratch_arms(self, tiny_network):
        """Test source=random shrinks a fresh model instead of the old one"""
        spec = InitSpec(mode=InitMode.SHRINK_PERTURB, source=ParamSource.RANDOM)
        out = initial_params(spec, tiny_network, 1)
        base = init_params(tiny_network, 2)
        assert out.bit_equal(base.combine(init_params(tiny_network, 3), 0.4, 0.001))
        assert not spec.needs_old_params

    def test_invalid_factors_rejected_by_spec(self):
        """Test InitSpec validates alpha and beta"""
        with pytest.raises(ValidationError):
            InitSpec(alpha=1.2)
        with pytest.raises(ValidationError):
            InitSpec(beta=-1.0)


class TestSchedulers:
    """Test learning-rate schedules and horizon compression"""

    def test_cosine_endpoints(self):
        """Test eta_max at t=0, eta_min at the horizon, the midpoint halfway"""
        sched = SchedulerSpec(horizon=1000)
        assert lr_at(sched, 0) == 1e-3
        assert lr_at(sched, 1000) == 1e-6
        assert abs(lr_at(sched, 500) - (1e-3 + 1e-6) / 2) < 1e-12

    def test_cosine_clamps_after_horizon(self):
        """Test the rate stays at eta_min past the effective horizon"""
        sched = SchedulerSpec(horizon=100, multiplier=0.25)
        assert sched.effective_horizon == 25
        assert lr_at(sched, 25) == sched.eta_min
        assert lr_at(sched, 99) == sched.eta_min

    def test_compression_rescales_time(self):
        """Test lr under multiplier m at t equals the full schedule at t / m, 1e3 random t"""
        rng = np.random.default_rng(11)
        full = SchedulerSpec(horizon=1000)
        for multiplier in (0.25, 0.5, 1.0):
            short = SchedulerSpec(horizon=1000, multiplier=multiplier)
            assert lr_at(short, short.effective_horizon) == pytest.approx(1e-6, abs=1e-12)
            for t in rng.uniform(0.0, 1500.0, size=1000):
                expected = lr_at(full, t / multiplier)
                assert lr_at(short, t) == pytest.approx(expected, rel=1e-12, abs=1e-18)

    def test_cosine_is_non_increasing(self):
        """Test the cosine schedule never rises"""
        sched = SchedulerSpec(horizon=200, multiplier=0.5)
        rates = [lr_at(sched, t) for t in range(300)]
        assert all(a >= b for a, b in zip(rates, rates[1:]))

    def test_multistep(self):
        """Test decays by gamma at each milestone, milestones scaled by the multiplier"""
        sched = SchedulerSpec(
            family=SchedulerFamily.MULTISTEP, horizon=1000, milestones=[500, 750], gamma=0.1
        )
        assert lr_at(sched, 499) == 1e-3
        assert lr_at(sched, 500) == pytest.approx(1e-4)
        assert lr_at(sched, 750) == pytest.approx(1e-5)
        short = sched.model_copy(update={"multiplier": 0.5})
        assert compressed_milestones(short) == [250, 375]
        assert lr_at(short, 250) == pytest.approx(1e-4)

    def test_constant(self):
        """Test the constant schedule ignores t"""
        sched = SchedulerSpec(family=SchedulerFamily.CONSTANT, horizon=10, eta_max=0.3)
        assert lr_at(sched, 0) == lr_at(sched, 1e6) == 0.3

    def test_negative_iteration_rejected(self):
        """Test t must be non-negative"""
        with pytest.raises(ValueError):
            lr_at(SchedulerSpec(horizon=10), -1)

    def test_invalid_specs_rejected(self):
        """Test eta ordering, multiplier and milestone checks"""
        with pytest.raises(ValidationError):
            SchedulerSpec(horizon=10, eta_max=1e-6, eta_min=1e-3)
        with pytest.raises(ValidationError):
            SchedulerSpec(horizon=10, multiplier=0.0)
        with pytest.raises(ValidationError):
            SchedulerSpec(horizon=10, milestones=[8, 4])


class TestOptimizers:
    """Test SGD and Adam steps"""

    def test_sgd_arithmetic(self):
        """Test theta=[1], g=[2], lr=0.5 gives [0]"""
        out = sgd_step(_vector(1.0), _vector(2.0), 0.5)
        np.testing.assert_array_equal(out["w"], [0.0])

    def test_sgd_zero_rate_is_identity(self):
        """Test lr=0 leaves parameters unchanged"""
        params = _vector(0.3, -0.7)
        assert sgd_step(params, _vector(5.0, 5.0), 0.0).bit_equal(params)

    def test_sgd_steps_accumulate_on_linear_loss(self):
        """Test two steps of h equal one step of 2h under a constant gradient"""
        params, grads = _vector(1.0, 2.0), _vector(0.25, -0.5)
        twice = sgd_step(sgd_step(params, grads, 0.1), grads, 0.1)
        once = sgd_step(params, grads, 0.2)
        np.testing.assert_allclose(twice["w"], once["w"], rtol=1e-15)

    def test_sgd_structure_mismatch_rejected(self):
        """Test gradients must match the parameters"""
        with pytest.raises(ParamStructureError):
            sgd_step(_vector(1.0), _vector(1.0, 2.0), 0.1)

    def test_adam_first_step(self):
        """Test the first bias-corrected step moves by lr * g / (|g| + eps)"""
        params, grads = _vector(0.0, 1.0, -1.0), _vector(0.5, -2.0, 1e-3)
        state = init_optimizer(OptimizerKind.ADAM, params)
        out, state = adam_step(state, params, grads, 0.01)
        g = grads["w"]
        expected = params["w"] - 0.01 * g / (np.abs(g) + 1e-8)
        np.testing.assert_allclose(out["w"], expected, rtol=1e-9)
        assert state.step == 1

    def test_adam_zero_gradient_keeps_params(self):
        """Test a zero gradient never moves the parameters"""
        params = _vector(0.1, -0.2)
        state = init_optimizer(OptimizerKind.ADAM, params)
        current = params
        for _ in range(100):
            current, state = adam_step(state, current, _vector(0.0, 0.0), 0.1)
        assert current.bit_equal(params)

    def test_adam_moments_stay_finite(self):
        """Test 1e4 random steps keep moments and parameters finite"""
        rng = np.random.default_rng(0)
        params = ParamSet({"w": rng.normal(size=(3, 2)), "b": np.zeros(2)})
        state = init_optimizer(OptimizerKind.ADAM, params)
        for _ in range(10_000):
            grads = params.map(lambda v: rng.normal(scale=10.0, size=v.shape))
            params, state = adam_step(state, params, grads, 1e-3)
        assert state.all_finite()
        assert params.all_finite()
        assert state.step == 10_000

    def test_adam_needs_adam_state(self):
        """Test an SGD state cannot drive an Adam step"""
        with pytest.raises(ValueError):
            adam_step(OptimizerState(kind=OptimizerKind.SGD), _vector(1.0), _vector(1.0), 0.1)

    def test_dispatch(self):
        """Test optimizer_step follows the state kind and counts steps"""
        params = _vector(1.0)
        out, state = optimizer_step(
            init_optimizer(OptimizerKind.SGD, params), params, _vector(1.0), 0.5
        )
        np.testing.assert_array_equal(out["w"], [0.5])
        assert state.step == 1 and state.kind == OptimizerKind.SGD


# ---------- Training loop ----------


@pytest.fixture
def merged(small_generator):
    train, test = gen_gaussian_classes(small_generator)
    (old_train, old_test), (new_train, new_test) = split_by_class(train, test, [3, 1], 0)
    return TrainingData(train=merge(old_train, new_train), test=merge(old_test, new_test))


def _plan(**overrides) -> TrainingPlan:
    fields = {
        "arm": "t",
        "network": NetworkSpec(layer_widths=[4, 8, 4]),
        "scheduler": SchedulerSpec(horizon=40, eta_max=1e-2),
        "iterations": 40,
        "eval_every": 10,
        "batch_size": 16,
        "probe_size": 16,
        "seed": 0,
    }
    fields.update(overrides)
    return TrainingPlan(**fields)


class TestTrainingLoop:
    """Test the instrumented training loop"""

    def test_epoch_length(self):
        """Test an epoch is ceil(|train| / batch) iterations"""
        assert epoch_length(80, 16) == 5
        assert epoch_length(81, 16) == 6
        assert epoch_length(0, 16) == 1

    def test_zero_iterations_evaluates_initial_model(self, merged):
        """Test an empty run records one evaluation of the starting model"""
        record = train(_plan(iterations=0), merged)
        assert record.eval_iterations == [0]
        assert record.test_accuracy == [record.initial_accuracy]
        assert record.train_loss == []
        assert record.grad_iterations == [0]
        assert record.status == RunStatus.COMPLETED

    def test_identical_seeds_identical_records(self, merged):
        """Test two runs of one plan agree bit for bit"""
        a = train_model(_plan(), merged)
        b = train_model(_plan(), merged)
        assert a.record.model_dump() == b.record.model_dump()
        assert a.params.bit_equal(b.params)

    def test_seed_changes_the_run(self, merged):
        """Test another seed gives another trajectory"""
        assert train(_plan(seed=0), merged).train_loss != train(_plan(seed=1), merged).train_loss

    def test_eval_cadence_includes_last_iteration(self, merged):
        """Test evaluations every k iterations plus the final one"""
        record = train(_plan(eval_every=15), merged)
        assert record.eval_iterations == [15, 30, 40]
        assert record.grad_iterations == [0, 15, 30, 40]
        assert len(record.train_loss) == record.iterations_completed == 40

    def test_per_origin_curves(self, merged):
        """Test old and new accuracies and gradient norms are recorded"""
        record = train(_plan(), merged)
        assert all(a is not None for a in record.test_accuracy_old)
        assert all(a is not None for a in record.test_accuracy_new)
        assert all(g is not None and g >= 0 for g in record.grad_norm_old + record.grad_norm_new)
        assert record.initial_accuracy_new is not None

    def test_old_only_data_has_no_new_curves(self, small_generator):
        """Test per-origin values are null for an absent origin"""
        train_set, test_set = gen_gaussian_classes(small_generator)
        record = train(_plan(iterations=10), TrainingData(train=train_set, test=test_set))
        assert record.initial_accuracy_new is None
        assert record.test_accuracy_new == [None]
        assert record.grad_norm_new == [None, None]

    def test_training_learns(self, merged):
        """Test accuracy improves on well separated clusters"""
        plan = _plan(iterations=120, scheduler=SchedulerSpec(horizon=120, eta_max=2e-2))
        record = train(plan, merged)
        assert record.final_accuracy > record.initial_accuracy

    def test_learning_speed_recording(self, merged):
        """Test one correctness column per completed epoch"""
        outcome = train_model(_plan(record_learning_speed=True), merged)
        assert outcome.correctness.epochs == 8
        assert len(outcome.learning_speeds) == len(merged.train)
        assert outcome.record.learning_speed_epochs == 8

    def test_divergence_stops_the_run(self, make_dataset):
        """Test a blown-up run is marked diverged and keeps its last finite parameters"""
        data = TrainingData(
            train=make_dataset(40, 10), test=make_dataset(10, 5, seed=1, id_start=100)
        )
        plan = _plan(
            network=NetworkSpec(layer_widths=[4, 8, 3]),
            objective=ObjectiveSpec(mode=ObjectiveMode.L2, lam=1.0),
            scheduler=SchedulerSpec(family=SchedulerFamily.CONSTANT, horizon=50, eta_max=1e30),
            optimizer=OptimizerKind.SGD,
            iterations=50,
        )
        outcome = train_model(plan, data)
        record = outcome.record
        assert record.status == RunStatus.DIVERGED
        assert record.diagnostic
        assert record.iterations_completed < 50
        assert outcome.params.all_finite()
        if record.iterations_completed:
            assert record.eval_iterations[-1] == record.iterations_completed

    def test_l2_init_keeps_weights_near_the_start(self, merged):
        """Test a strong anchor holds parameters closer to the phase start"""
        start = train_model(_plan(), merged).params

        def distance(lam: float) -> float:
            plan = _plan(
                init=InitSpec(mode=InitMode.NAIVE),
                objective=ObjectiveSpec(mode=ObjectiveMode.L2_INIT, lam=lam),
                optimizer=OptimizerKind.SGD,
                scheduler=SchedulerSpec(family=SchedulerFamily.CONSTANT, horizon=40, eta_max=0.05),
            )
            return (train_model(plan, merged, start).params - start).squared_norm()

        assert distance(5.0) < distance(0.0)

    def test_naive_start_keeps_old_accuracy(self, merged):
        """Test a naive warm start begins where the old model ended"""
        old = train_model(_plan(), merged)
        warm = train(_plan(iterations=0, init=InitSpec(mode=InitMode.NAIVE)), merged, old.params)
        assert warm.initial_accuracy == old.record.final_accuracy

    def test_easy_hard_without_table_or_recording_rejected(self, merged):
        """Test easy_hard needs learning speeds from somewhere"""
        plan = _plan(sampler=SamplerSpec(mode=SamplerMode.EASY_HARD))
        with pytest.raises(SamplerError):
            train(plan, merged)

    def test_easy_hard_records_its_own_speeds(self, merged):
        """Test easy_hard with recording epochs warms up then switches"""
        plan = _plan(sampler=SamplerSpec(mode=SamplerMode.EASY_HARD, recording_epochs=2))
        record = train(plan, merged)
        assert record.status == RunStatus.COMPLETED
        assert record.iterations_completed == 40
        assert record.learning_speed_epochs == 2

    def test_dimension_mismatch_rejected(self, merged):
        """Test the network input must fit the data"""
        with pytest.raises(DatasetError):
            train(_plan(network=NetworkSpec(layer_widths=[5, 8, 4])), merged)

    def test_empty_test_set_rejected(self, merged, make_dataset):
        """Test evaluation needs held-out samples"""
        with pytest.raises(DatasetError):
            TrainingData(train=merged.train, test=make_dataset(0))

    def test_telemetry_receives_run(self, merged):
        """Test iterations and run outcome reach the telemetry"""
        telemetry = MagicMock()
        train(_plan(), merged, telemetry=telemetry)
        telemetry.span.assert_called_once_with("train", arm="t", seed=0)
        telemetry.record_iterations.assert_called_once_with("t", 40)
        telemetry.record_run.assert_called_once_with("t", "completed", ANY)
