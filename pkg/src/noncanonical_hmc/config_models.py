from enum import Enum
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

Matrix = list[list[float]]


class VariantTag(str, Enum):
    """Families of constant Poisson structures.

    - canonical: E = G = 0, A = A* (identity unless preconditioned)
    - magnetic-position: E = 0, random or given G
    - magnetic-momentum: G = 0, random or given E
    - coupled-magnet: E = G = H*
    - mass-preconditioned: E = G = 0, A = M
    - magnetic-position-preconditioned: E = 0, A = M, random or given G
    - random-full: every entry of the 2n x 2n Poisson matrix is random
    """

    CANONICAL = "canonical"
    MAGNETIC_POSITION = "magnetic-position"
    MAGNETIC_MOMENTUM = "magnetic-momentum"
    COUPLED_MAGNET = "coupled-magnet"
    MASS_PRECONDITIONED = "mass-preconditioned"
    MAGNETIC_POSITION_PRECONDITIONED = "magnetic-position-preconditioned"
    RANDOM_FULL = "random-full"


CANONICAL_VARIANTS = {VariantTag.CANONICAL, VariantTag.MASS_PRECONDITIONED}


class IntegratorKind(str, Enum):
    LEAPFROG = "leapfrog"
    IMPLICIT = "implicit"
    EXPLICIT = "explicit"


class Task(str, Enum):
    GAUSSIAN = "gaussian"
    MIXTURE = "mixture"
    LOGISTIC = "logistic"
    FITZHUGH_NAGUMO = "fitzhugh-nagumo"
    OMEGA_SWEEP = "omega-sweep"
    TRAJECTORY = "trajectory"


class Method(str, Enum):
    CAN_LEAPFROG = "can-leapfrog"
    CAN_IMP = "can-imp"
    MAG_POS_EXP = "mag-pos-exp"
    MAG_MOM_IMP = "mag-mom-imp"
    MAG_MOM_EXP = "mag-mom-exp"
    CMAG_IMP = "cmag-imp"
    CMAG_EXP = "cmag-exp"


class IntegratorConfig(BaseModel):
    """Numerical settings shared by the three integrators.

    ``omega`` is only read by the explicit integrator, ``fp_tol`` and
    ``fp_max_iters`` only by implicit midpoint.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)
    step_size: float
    n_steps: int = Field(ge=1)
    omega: float = Field(default=1.0, gt=0.0)
    fp_tol: float = Field(default=1e-6, gt=0.0)
    fp_max_iters: int = Field(default=100, ge=1)

    @field_validator("step_size")
    @classmethod
    def step_size_nonzero(cls, value: float) -> float:
        if value == 0.0:
            raise ValueError("step_size must be nonzero")
        return value


class StructureSpec(BaseModel):
    """Serializable recipe for a Poisson structure.

    Blocks left as None are either drawn from the seeded stream (G, E, H)
    or default to the identity (A).
    """

    model_config = ConfigDict(extra="forbid", frozen=True)
    variant: VariantTag = VariantTag.CANONICAL
    seed: int = 0
    k: int = Field(default=1, ge=1)
    A: Optional[Matrix] = None
    G: Optional[Matrix] = None
    E: Optional[Matrix] = None
    H: Optional[Matrix] = None
    M: Optional[Matrix] = None

    @model_validator(mode="after")
    def mass_matrix_present(self) -> "StructureSpec":
        if (
            self.variant
            in (
                VariantTag.MASS_PRECONDITIONED,
                VariantTag.MAGNETIC_POSITION_PRECONDITIONED,
            )
            and self.M is None
        ):
            raise ValueError(f"Variant {self.variant.value} requires a mass matrix M")
        return self


class SamplerConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)
    integrator: IntegratorKind
    structure: StructureSpec = StructureSpec()
    integration: IntegratorConfig
    n_samples: int = Field(ge=1)
    chain_seed: int = 0
    flip_on_reject: bool = False
    initial_q: list[float]
    gram_schmidt_restarts: int = Field(default=8, ge=1)

    @model_validator(mode="after")
    def leapfrog_needs_canonical(self) -> "SamplerConfig":
        if (
            self.integrator == IntegratorKind.LEAPFROG
            and self.structure.variant not in CANONICAL_VARIANTS
        ):
            raise ValueError(
                "Leapfrog is only valid for canonical structures, "
                f"got {self.structure.variant.value}"
            )
        return self

    @property
    def dim(self) -> int:
        return len(self.initial_q)


class TaskProtocol(BaseModel):
    """Default protocol for one experiment task, read from protocol_config.toml."""

    model_config = ConfigDict(extra="forbid")
    step_size: Optional[float] = None
    step_size_rule: Literal["fixed", "inverse-ten-n-train"] = "fixed"
    n_steps: int = Field(ge=1)
    n_samples: int = Field(default=1000, ge=1)
    n_chains: int = Field(default=1, ge=1)
    k: int = Field(default=1, ge=1)
    omega: float = Field(default=1.0, gt=0.0)
    dim: Optional[int] = None
    observations: Optional[int] = None
    omegas: Optional[list[float]] = None
    default_method: Optional[Method] = None

    @model_validator(mode="after")
    def step_size_defined(self) -> "TaskProtocol":
        if self.step_size_rule == "fixed" and self.step_size is None:
            raise ValueError("A fixed step-size rule needs a step_size")
        return self


class ProtocolConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")
    gram_schmidt_restarts: int = Field(default=8, ge=1)
    task: dict[Task, TaskProtocol]


class ExperimentSpec(BaseModel):
    """Everything needed to (re)run one experiment.

    Fields left as None are filled from the task protocol; the resolved spec is
    what ends up in the run manifest, so replaying a manifest never consults the
    protocol file again.
    """

    model_config = ConfigDict(extra="forbid")
    task: Task
    method: Optional[Method] = None
    dataset: Optional[Path] = None
    fn_data: Optional[Path] = None
    step_size: Optional[float] = None
    n_steps: Optional[int] = Field(default=None, ge=1)
    n_samples: Optional[int] = Field(default=None, ge=1)
    n_chains: Optional[int] = Field(default=None, ge=1)
    k: Optional[int] = Field(default=None, ge=1)
    omega: Optional[float] = Field(default=None, gt=0.0)
    omegas: Optional[list[float]] = None
    dim: Optional[int] = Field(default=None, ge=1)
    observations: Optional[int] = Field(default=None, ge=1)
    seed: int = 0
    chain_seed: int = 0
    flip_on_reject: bool = False
    workers: int = Field(default=1, ge=1)
    output_dir: Optional[Path] = None

    @field_validator("step_size")
    @classmethod
    def step_size_nonzero(cls, value: Optional[float]) -> Optional[float]:
        if value is not None and value == 0.0:
            raise ValueError("step_size must be nonzero")
        return value

    @field_validator("omegas")
    @classmethod
    def omegas_positive(cls, value: Optional[list[float]]) -> Optional[list[float]]:
        if value is not None and (not value or any(w <= 0.0 for w in value)):
            raise ValueError("omegas must be a non-empty list of positive values")
        return value

    @model_validator(mode="after")
    def task_requirements(self) -> "ExperimentSpec":
        if self.task == Task.LOGISTIC and self.dataset is None:
            raise ValueError("The logistic task requires a dataset path")
        return self
