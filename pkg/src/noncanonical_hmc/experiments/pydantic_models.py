import logging
import math

from pydantic import BaseModel, field_validator

from noncanonical_hmc.config_models import ExperimentSpec, Matrix

logger = logging.getLogger(__name__)


class StructureDocument(BaseModel):
    """JSON form of a structure and its Darboux basis, matrices row-major."""

    n: int
    E: Matrix
    A: Matrix
    G: Matrix
    basisB: Matrix | None = None

    @field_validator("E", "A", "G", "basisB", mode="after")
    @classmethod
    def square_rows(cls, value: Matrix | None) -> Matrix | None:
        if value is not None and any(len(row) != len(value) for row in value):
            raise ValueError("Matrices must be square")
        return value


class RunManifest(BaseModel):
    """Resolved experiment spec plus provenance; replaying it reruns the experiment."""

    spec: ExperimentSpec
    version: str
    derived: dict[str, float | int | str]


class ExperimentSummary(BaseModel):
    method: str
    ess_mean: float
    ess_min: float
    ess_min_per_sec: float | None
    rhat_max: float | None
    accept_rate: float
    wall_seconds: float
    gradient_evals: int

    @field_validator("ess_min_per_sec", "rhat_max", mode="after")
    @classmethod
    def nan_to_none(cls, value: float | None) -> float | None:
        """JSON has no NaN, so undefined values are written as null."""
        if value is not None and not math.isfinite(value):
            logger.warning("Received a non-finite summary value, writing null.")
            return None
        return value


class ErrorMessage(BaseModel):
    error: str
    message: str


class SweepSummary(BaseModel):
    """Outcome of an omega sweep.

    ``defect_slope_within_band`` and ``unit_omega_agreement`` are None when the
    check cannot be made: a slope needs two omegas with a positive finite
    defect, the agreement check needs omega = 1 on the grid.
    """

    omegas: list[float]
    defect_slope: float | None
    defect_slope_band: tuple[float, float]
    defect_slope_within_band: bool | None
    discrepancy_median: list[float]
    discrepancy_tolerance: float
    unit_omega_agreement: bool | None

    @field_validator("defect_slope", mode="after")
    @classmethod
    def nan_to_none(cls, value: float | None) -> float | None:
        if value is not None and not math.isfinite(value):
            return None
        return value
