# models/specs.py
from __future__ import annotations

import hashlib
import json
import math
from enum import Enum
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from sunkcost.core.params import ParamSet
from sunkcost.sampling.learning_speed import LearningSpeedTable

# ---------- Enumerations (tight, predictable) ----------


class Activation(str, Enum):
    RELU = "relu"


class InitMode(str, Enum):
    SCRATCH = "scratch"
    NAIVE = "naive"
    SHRINK_PERTURB = "shrink_perturb"


class ParamSource(str, Enum):
    OLD = "old"        # previously trained model
    RANDOM = "random"  # fresh random model (scratch arms)


class ObjectiveMode(str, Enum):
    NONE = "none"
    L2 = "l2"
    L2_INIT = "l2_init"
    REG_ONLY = "reg_only_test_fixture"


class SchedulerFamily(str, Enum):
    COSINE = "cosine"
    MULTISTEP = "multistep"
    CONSTANT = "constant"


class SamplerMode(str, Enum):
    PROPORTIONAL = "proportional"
    BALANCED = "balanced_old_new"
    EASY_HARD = "easy_hard"


class OptimizerKind(str, Enum):
    SGD = "sgd"
    ADAM = "adam"


class ScenarioKind(str, Enum):
    CLASS_INCREMENTAL = "class_incremental"
    DOMAIN_SHIFT = "domain_shift"


class TargetMode(str, Enum):
    FINAL = "final"
    MAX = "max"


class SweepParameter(str, Enum):
    ALPHA = "alpha"
    BETA = "beta"
    LAM = "lam"
    C = "c"
    R = "r"
    MULTIPLIER = "scheduler_multiplier"


# ---------- Fingerprints ----------


def canonical_json(payload: Any) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def fingerprint_of(*payloads: Any) -> str:
    digest = hashlib.sha256()
    for payload in payloads:
        digest.update(canonical_json(payload).encode("utf-8"))
        digest.update(b"\x00")
    return digest.hexdigest()


# ---------- Model and optimization specs ----------


class NetworkSpec(BaseModel):
    """Fully connected ReLU classifier: input width, hidden widths..., class count."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    layer_widths: list[int] = Field(description="Input dim, hidden dims..., class count.")
    activation: Activation = Field(default=Activation.RELU, description="Hidden activation.")

    @field_validator("layer_widths")
    @classmethod
    def _check_widths(cls, widths: list[int]) -> list[int]:
        if len(widths) < 2:
            raise ValueError("layer_widths needs at least an input and an output width")
        if any(w <= 0 for w in widths):
            raise ValueError(f"layer_widths must be positive, got {widths}")
        return widths

    @property
    def input_width(self) -> int:
        return self.layer_widths[0]

    @property
    def class_count(self) -> int:
        return self.layer_widths[-1]

    @property
    def layer_count(self) -> int:
        return len(self.layer_widths) - 1


class InitSpec(BaseModel):
    """theta_init = alpha * theta_base + beta * theta_random (shrink_perturb mode)."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    mode: InitMode = Field(default=InitMode.SCRATCH, description="Initialization rule.")
    alpha: float = Field(default=0.4, description="Shrink factor in [0, 1].")
    beta: float = Field(default=0.001, description="Perturb factor >= 0.")
    source: ParamSource = Field(
        default=ParamSource.OLD,
        description="Base parameters for naive/shrink_perturb; ignored for scratch.",
    )
    random_seed: int | None = Field(
        default=None, description="Seed for theta_random; derived from the run seed if null."
    )

    @field_validator("alpha")
    @classmethod
    def _check_alpha(cls, alpha: float) -> float:
        if not 0.0 <= alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
        return alpha

    @field_validator("beta")
    @classmethod
    def _check_beta(cls, beta: float) -> float:
        if not beta >= 0.0:
            raise ValueError(f"beta must be >= 0, got {beta}")
        return beta

    @property
    def needs_old_params(self) -> bool:
        return self.mode != InitMode.SCRATCH and self.source == ParamSource.OLD


class ObjectiveSpec(BaseModel):
    """Mean cross-entropy plus lam * ||theta - theta_ref||^2."""

    model_config = ConfigDict(extra="forbid", arbitrary_types_allowed=True)

    mode: ObjectiveMode = Field(default=ObjectiveMode.NONE, description="Regularizer family.")
    lam: float = Field(default=0.01, description="Regularization strength >= 0.")
    reference: ParamSet | None = Field(
        default=None,
        exclude=True,
        description="theta_ref; zeros for l2, phase-start weights for l2_init. Runtime only.",
    )

    @field_validator("lam")
    @classmethod
    def _check_lam(cls, lam: float) -> float:
        if not lam >= 0.0:
            raise ValueError(f"lam must be >= 0, got {lam}")
        return lam

    @property
    def has_data_term(self) -> bool:
        return self.mode != ObjectiveMode.REG_ONLY

    @property
    def is_regularized(self) -> bool:
        return self.mode != ObjectiveMode.NONE and self.lam > 0.0

    def anchored_at(self, params: ParamSet) -> ObjectiveSpec:
        return self.model_copy(update={"reference": params.copy()})


class SchedulerSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    family: SchedulerFamily = Field(default=SchedulerFamily.COSINE)
    eta_max: float = Field(default=1e-3, description="Starting learning rate.")
    eta_min: float = Field(default=1e-6, description="Floor reached at the effective horizon.")
    horizon: int = Field(description="Iterations at multiplier 1.0.")
    multiplier: float = Field(default=1.0, description="Horizon compression factor > 0.")
    milestones: list[int] = Field(
        default_factory=list, description="Multistep decay iterations at multiplier 1.0."
    )
    gamma: float = Field(default=0.1, description="Multistep decay factor.")

    @model_validator(mode="after")
    def _check(self) -> SchedulerSpec:
        if not 0.0 <= self.eta_min <= self.eta_max:
            raise ValueError(f"need 0 <= eta_min <= eta_max, got {self.eta_min}, {self.eta_max}")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if not self.multiplier > 0.0:
            raise ValueError(f"multiplier must be > 0, got {self.multiplier}")
        if any(m <= 0 for m in self.milestones) or self.milestones != sorted(self.milestones):
            raise ValueError(f"milestones must be positive and sorted, got {self.milestones}")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma}")
        return self

    @property
    def effective_horizon(self) -> int:
        return max(1, math.ceil(self.multiplier * self.horizon))


class SamplerSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", arbitrary_types_allowed=True)

    mode: SamplerMode = Field(default=SamplerMode.PROPORTIONAL)
    c: float = Field(default=0.2, description="Fraction of old samples affected, in [0, 1).")
    r: float = Field(default=0.1, description="Relative sampling weight of affected samples.")
    recording_epochs: int = Field(
        default=0,
        description="Without a table, sample proportionally for this many epochs while "
        "recording learning speeds, then switch to easy/hard weights.",
    )
    learning_speeds: LearningSpeedTable | None = Field(
        default=None, exclude=True, description="Runtime only."
    )

    @field_validator("c")
    @classmethod
    def _check_c(cls, c: float) -> float:
        if not 0.0 <= c < 1.0:
            raise ValueError(f"c must lie in [0, 1), got {c}")
        return c

    @field_validator("r")
    @classmethod
    def _check_r(cls, r: float) -> float:
        if not r >= 0.0:
            raise ValueError(f"r must be >= 0, got {r}")
        return r

    @field_validator("recording_epochs")
    @classmethod
    def _check_recording(cls, epochs: int) -> int:
        if epochs < 0:
            raise ValueError("recording_epochs must be >= 0")
        return epochs

    def with_table(self, table: LearningSpeedTable | None) -> SamplerSpec:
        return self.model_copy(update={"learning_speeds": table})


# ---------- Scenario ----------


class GeneratorParams(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    dimension: int = Field(default=32, description="Feature dimension >= 2.")
    classes: int = Field(default=10, description="Class count >= 2.")
    cluster_spread: float = Field(default=2.5, description="Isotropic std of every cluster.")
    mean_scale: float = Field(default=1.0, description="Std of the random class means.")
    train_per_class: int = Field(default=500, description="Training samples per class >= 10.")
    test_per_class: int = Field(default=100, description="Held-out samples per class >= 1.")
    seed: int = Field(default=0, description="Generator seed.")

    @model_validator(mode="after")
    def _check(self) -> GeneratorParams:
        errors = []
        if self.classes < 2:
            errors.append("classes must be >= 2")
        if self.dimension < 2:
            errors.append("dimension must be >= 2")
        if self.train_per_class < 10:
            errors.append("train_per_class must be >= 10")
        if self.test_per_class < 1:
            errors.append("test_per_class must be >= 1")
        if not (math.isfinite(self.cluster_spread) and self.cluster_spread >= 0.0):
            errors.append("cluster_spread must be finite and >= 0")
        if not (math.isfinite(self.mean_scale) and self.mean_scale > 0.0):
            errors.append("mean_scale must be finite and > 0")
        if errors:
            raise ValueError("; ".join(errors))
        return self


class ShiftParams(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    rotation: float = Field(default=0.0, description="Rotation angle (radians) per random plane.")
    translation_scale: float = Field(default=0.0, description="Std of the random offset.")
    noise_std: float = Field(default=0.0, description="Std of additive Gaussian noise.")
    new_fraction: float = Field(
        default=0.3, description="Share of each class drawn into the shifted new domain."
    )

    @model_validator(mode="after")
    def _check(self) -> ShiftParams:
        values = (self.rotation, self.translation_scale, self.noise_std)
        if not all(math.isfinite(v) for v in values):
            raise ValueError(f"shift params must be finite, got {values}")
        if self.translation_scale < 0.0 or self.noise_std < 0.0:
            raise ValueError("translation_scale and noise_std must be >= 0")
        if not 0.0 < self.new_fraction < 1.0:
            raise ValueError(f"new_fraction must lie in (0, 1), got {self.new_fraction}")
        return self


class ScenarioSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: ScenarioKind = Field(default=ScenarioKind.CLASS_INCREMENTAL)
    class_splits: list[int] = Field(default_factory=lambda: [7, 3])
    generator: GeneratorParams = Field(default_factory=GeneratorParams)
    shift: ShiftParams = Field(default_factory=ShiftParams)

    @model_validator(mode="after")
    def _check(self) -> ScenarioSpec:
        if not self.class_splits or any(s <= 0 for s in self.class_splits):
            raise ValueError(f"class_splits must be positive, got {self.class_splits}")
        if sum(self.class_splits) != self.generator.classes:
            raise ValueError(
                f"class_splits {self.class_splits} must sum to {self.generator.classes}"
            )
        if self.kind == ScenarioKind.CLASS_INCREMENTAL and len(self.class_splits) != 2:
            raise ValueError("class_incremental scenarios need exactly an old and a new group")
        if self.kind == ScenarioKind.DOMAIN_SHIFT and len(self.class_splits) != 1:
            raise ValueError("domain_shift scenarios keep every class in one group")
        return self


# ---------- Training plan ----------


class TrainingPlan(BaseModel):
    """Everything that determines one training run besides its data."""

    model_config = ConfigDict(extra="forbid")

    arm: str = Field(default="run", description="Arm label carried into the record.")
    network: NetworkSpec
    init: InitSpec = Field(default_factory=InitSpec)
    objective: ObjectiveSpec = Field(default_factory=ObjectiveSpec)
    sampler: SamplerSpec = Field(default_factory=SamplerSpec)
    scheduler: SchedulerSpec
    optimizer: OptimizerKind = Field(default=OptimizerKind.ADAM)
    iterations: int = Field(description="Total optimizer steps >= 0.")
    eval_every: int = Field(description="Evaluation cadence k >= 1.")
    batch_size: int = Field(default=128)
    probe_size: int = Field(default=256, description="Gradient-norm probe samples per origin.")
    record_learning_speed: bool = Field(
        default=False, description="Record per-epoch correctness on the training set."
    )
    seed: int = Field(default=0)

    @model_validator(mode="after")
    def _check(self) -> TrainingPlan:
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if self.eval_every < 1:
            raise ValueError("eval_every must be >= 1")
        if self.batch_size < 1 or self.probe_size < 1:
            raise ValueError("batch_size and probe_size must be >= 1")
        return self

    def fingerprint(self, data_fingerprint: str = "") -> str:
        return fingerprint_of(self.model_dump(mode="json"), data_fingerprint)


# ---------- Harness configs ----------


class ArmConfig(BaseModel):
    """One row of the ablation grid."""

    model_config = ConfigDict(extra="forbid")

    name: str
    init: InitSpec = Field(default_factory=InitSpec)
    objective: ObjectiveSpec = Field(default_factory=ObjectiveSpec)
    sampler: SamplerSpec = Field(default_factory=SamplerSpec)
    scheduler_multiplier: float = Field(default=1.0)

    @field_validator("scheduler_multiplier")
    @classmethod
    def _check_multiplier(cls, m: float) -> float:
        if not m > 0.0:
            raise ValueError(f"scheduler_multiplier must be > 0, got {m}")
        return m

    @property
    def is_continuous(self) -> bool:
        return self.init.needs_old_params

    def components(self) -> dict[str, str]:
        """Aspect flags for report rows: start, init, reg, data, sched."""
        return {
            "start": "continuous" if self.is_continuous else "scratch",
            "init": "S&P" if self.init.mode == InitMode.SHRINK_PERTURB else "",
            "reg": self.objective.mode.value if self.objective.is_regularized else "",
            "data": self.sampler.mode.value if self.sampler.mode != SamplerMode.PROPORTIONAL
            else "",
            "sched": f"x{self.scheduler_multiplier:g}" if self.scheduler_multiplier != 1.0 else "",
        }

    def with_parameter(self, parameter: SweepParameter, value: float) -> ArmConfig:
        """Copy with one hyperparameter replaced; illegal values raise ValidationError."""
        data = self.model_dump(mode="json")
        if parameter == SweepParameter.ALPHA:
            data["init"]["alpha"] = value
        elif parameter == SweepParameter.BETA:
            data["init"]["beta"] = value
        elif parameter == SweepParameter.LAM:
            data["objective"]["lam"] = value
        elif parameter == SweepParameter.C:
            data["sampler"]["c"] = value
        elif parameter == SweepParameter.R:
            data["sampler"]["r"] = value
        elif parameter == SweepParameter.MULTIPLIER:
            data["scheduler_multiplier"] = value
        data["name"] = f"{self.name}[{parameter.value}={value:g}]"
        return ArmConfig.model_validate(data)


class OldPhaseConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    iterations: int = Field(default=1500, description="Optimizer steps for the old model.")
    record_learning_speeds: bool = Field(default=True)


class TrainingDefaults(BaseModel):
    """Fields shared by scenario and sequence configs."""

    model_config = ConfigDict(extra="forbid")

    hidden_widths: list[int] = Field(default_factory=lambda: [64])
    optimizer: OptimizerKind = Field(default=OptimizerKind.ADAM)
    batch_size: int = Field(default=128)
    probe_size: int = Field(default=256)
    eval_every: int | None = Field(
        default=None, description="Evaluation cadence; null means once per epoch-equivalent."
    )
    scheduler_family: SchedulerFamily = Field(default=SchedulerFamily.COSINE)
    eta_max: float = Field(default=1e-3)
    eta_min: float = Field(default=1e-6)
    milestone_fractions: list[float] = Field(
        default_factory=lambda: [0.5, 0.75],
        description="Multistep milestones as fractions of the horizon.",
    )
    gamma: float = Field(default=0.1)
    seeds: list[int] = Field(default_factory=lambda: [0, 1, 2, 3, 4])
    r_values: list[float] = Field(default_factory=lambda: [99.0, 100.0])
    target_mode: TargetMode = Field(default=TargetMode.FINAL)
    output_dir: str = Field(default="runs/desk")
    scratch_recording_epochs: int = Field(
        default=2, description="Learning-speed recording epochs for scratch easy/hard arms."
    )

    @model_validator(mode="after")
    def _check_defaults(self) -> TrainingDefaults:
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError(f"seeds must be unique, got {self.seeds}")
        if any(not 0.0 < r <= 100.0 for r in self.r_values):
            raise ValueError(f"r_values must lie in (0, 100], got {self.r_values}")
        if any(w <= 0 for w in self.hidden_widths):
            raise ValueError("hidden widths must be positive")
        if self.eval_every is not None and self.eval_every < 1:
            raise ValueError("eval_every must be >= 1")
        if any(not 0.0 < f < 1.0 for f in self.milestone_fractions):
            raise ValueError("milestone fractions must lie in (0, 1)")
        if self.scratch_recording_epochs < 0:
            raise ValueError("scratch_recording_epochs must be >= 0")
        return self

    def network_for(self, dimension: int, classes: int) -> NetworkSpec:
        return NetworkSpec(layer_widths=[dimension, *self.hidden_widths, classes])

    def scheduler_for(self, horizon: int, multiplier: float = 1.0) -> SchedulerSpec:
        return SchedulerSpec(
            family=self.scheduler_family,
            eta_max=self.eta_max,
            eta_min=self.eta_min,
            horizon=max(1, horizon),
            multiplier=multiplier,
            milestones=sorted({max(1, round(f * horizon)) for f in self.milestone_fractions}),
            gamma=self.gamma,
        )

    def cadence_for(self, train_size: int) -> int:
        if self.eval_every is not None:
            return self.eval_every
        return max(1, math.ceil(train_size / self.batch_size))


class ExperimentConfig(TrainingDefaults):
    schema_version: Literal["experiment.v1"] = "experiment.v1"
    scenario: ScenarioSpec = Field(default_factory=ScenarioSpec)
    arms: list[ArmConfig]
    baseline_arm: str = Field(default="scratch", description="Arm that defines a_scratch.")
    iterations: int = Field(default=2000, description="Phase-2 iterations T.")
    old_phase: OldPhaseConfig = Field(default_factory=OldPhaseConfig)
    old_phase_dir: str | None = Field(
        default=None, description="Old-phase cache directory; defaults to <output_dir>/old_phase."
    )
    export_data: bool = Field(
        default=False, description="Also write each seed's datasets as CSV under <output_dir>/data."
    )

    @model_validator(mode="after")
    def _check_arms(self) -> ExperimentConfig:
        names = [arm.name for arm in self.arms]
        if not names:
            raise ValueError("at least one arm is required")
        if len(set(names)) != len(names):
            raise ValueError(f"arm names must be unique, got {names}")
        if self.baseline_arm not in names:
            raise ValueError(f"baseline arm {self.baseline_arm!r} is not among {names}")
        if self.iterations < 0 or self.old_phase.iterations < 0:
            raise ValueError("iterations must be >= 0")
        return self

    def arm(self, name: str) -> ArmConfig:
        return next(arm for arm in self.arms if arm.name == name)


class SequenceConfig(TrainingDefaults):
    schema_version: Literal["sequence.v1"] = "sequence.v1"
    generator: GeneratorParams = Field(default_factory=GeneratorParams)
    base_classes: int = Field(default=5)
    increments: list[int] = Field(default_factory=lambda: [1, 1, 1, 1, 1])
    iterations_per_task: int = Field(default=1500)
    method: ArmConfig
    reference: ArmConfig = Field(
        default_factory=lambda: ArmConfig(name="scratch"),
        description="Per-task from-scratch reference arm.",
    )

    @model_validator(mode="after")
    def _check_tasks(self) -> SequenceConfig:
        if self.base_classes <= 0 or any(i <= 0 for i in self.increments):
            raise ValueError("base_classes and increments must be positive")
        if self.base_classes + sum(self.increments) > self.generator.classes:
            raise ValueError(
                f"{self.base_classes} + {self.increments} exceeds {self.generator.classes} classes"
            )
        if self.iterations_per_task < 0:
            raise ValueError("iterations_per_task must be >= 0")
        if not self.method.is_continuous:
            raise ValueError(
                f"method arm {self.method.name!r} must start from the previous model"
            )
        if self.reference.is_continuous:
            raise ValueError(f"reference arm {self.reference.name!r} must train from scratch")
        return self


class SweepConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    schema_version: Literal["sweep.v1"] = "sweep.v1"
    experiment: ExperimentConfig
    parameter: SweepParameter
    values: list[float]
    base_arm: ArmConfig

    @model_validator(mode="after")
    def _check_grid(self) -> SweepConfig:
        if not self.values:
            raise ValueError("sweep grid must not be empty")
        for value in self.values:
            # raises ValidationError for out-of-range values
            self.base_arm.with_parameter(self.parameter, value)
        return self
