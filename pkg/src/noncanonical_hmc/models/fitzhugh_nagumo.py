"""
Fitzhugh-Nagumo parameter inference.

The ODE

    dV/dt = c (V - V^3 / 3 + R)
    dR/dt = -(V - a + b R) / c

is solved with fixed-step RK4 together with its forward sensitivities with
respect to (a, b, c), which gives the gradient of the potential.
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd
from numba import njit
from pydantic import BaseModel, ConfigDict

from noncanonical_hmc.models.base import ModelEvaluationError, TargetModel

logger = logging.getLogger(__name__)

TRUE_PARAMS = (0.2, 0.2, 3.0)
INITIAL_STATE = (-1.0, 1.0)
NOISE_SCALE = 0.1
TIME_HORIZON = 10.0
MAX_STEP = 0.005
PRIOR_VARIANCE = 0.5
LIKELIHOOD_VARIANCE = 0.5

# state layout: V, R, then the 2 x 3 sensitivity matrix d(V, R)/d(a, b, c) row-major
STATE_SIZE = 8


@njit(error_model="numpy")
def _vector_field(state, a, b, c, out):
    V = state[0]
    R = state[1]
    excitation = V - V * V * V / 3.0 + R
    recovery = V - a + b * R
    out[0] = c * excitation
    out[1] = -recovery / c

    dv_dv = c * (1.0 - V * V)
    dv_dr = c
    dr_dv = -1.0 / c
    dr_dr = -b / c
    for j in range(3):
        s_v = state[2 + j]
        s_r = state[5 + j]
        out[2 + j] = dv_dv * s_v + dv_dr * s_r
        out[5 + j] = dr_dv * s_v + dr_dr * s_r
    out[4] += excitation
    out[5] += 1.0 / c
    out[6] += -R / c
    out[7] += recovery / (c * c)


@njit(error_model="numpy")
def _rk4_step(state, a, b, c, h, k1, k2, k3, k4, scratch):
    _vector_field(state, a, b, c, k1)
    for i in range(STATE_SIZE):
        scratch[i] = state[i] + 0.5 * h * k1[i]
    _vector_field(scratch, a, b, c, k2)
    for i in range(STATE_SIZE):
        scratch[i] = state[i] + 0.5 * h * k2[i]
    _vector_field(scratch, a, b, c, k3)
    for i in range(STATE_SIZE):
        scratch[i] = state[i] + h * k3[i]
    _vector_field(scratch, a, b, c, k4)
    for i in range(STATE_SIZE):
        state[i] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])


@njit(error_model="numpy")
def solve_with_sensitivities(theta, initial_state, times, max_step):
    """RK4 solution and sensitivities at ``times``, integrating from t = 0.

    Returns an array of shape (len(times), 8): V, R and the row-major 2 x 3
    sensitivity matrix at each observation time.
    """
    a = theta[0]
    b = theta[1]
    c = theta[2]
    out = np.empty((times.shape[0], STATE_SIZE))
    state = np.zeros(STATE_SIZE)
    state[0] = initial_state[0]
    state[1] = initial_state[1]
    k1 = np.empty(STATE_SIZE)
    k2 = np.empty(STATE_SIZE)
    k3 = np.empty(STATE_SIZE)
    k4 = np.empty(STATE_SIZE)
    scratch = np.empty(STATE_SIZE)
    t = 0.0
    for i in range(times.shape[0]):
        span = times[i] - t
        if span > 0.0:
            n_sub = int(np.ceil(span / max_step - 1e-9))
            if n_sub < 1:
                n_sub = 1
            h = span / n_sub
            for _ in range(n_sub):
                _rk4_step(state, a, b, c, h, k1, k2, k3, k4, scratch)
            t = times[i]
        out[i, :] = state
    return out


class FnDataSidecar(BaseModel):
    model_config = ConfigDict(extra="forbid")
    seed: int | None
    initial_state: tuple[float, float]
    true_params: tuple[float, float, float]
    sigma_noise: float
    noiseless: bool = False


@dataclass(frozen=True, eq=False)
class FitzhughNagumoData:
    times: np.ndarray
    obs_v: np.ndarray
    obs_r: np.ndarray
    sigma_noise: float = NOISE_SCALE
    initial_state: tuple[float, float] = INITIAL_STATE
    true_params: tuple[float, float, float] = TRUE_PARAMS
    seed: int | None = None
    noiseless: bool = False

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=np.float64)
        if times.ndim != 1 or times.size == 0:
            raise ValueError("Observation times must be a non-empty vector")
        if np.any(np.diff(times) <= 0.0) or times[0] < 0.0:
            raise ValueError("Observation times must be non-negative and increasing")
        if len(self.obs_v) != times.size or len(self.obs_r) != times.size:
            raise ValueError("Observation lengths must match the number of times")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "obs_v", np.asarray(self.obs_v, dtype=np.float64))
        object.__setattr__(self, "obs_r", np.asarray(self.obs_r, dtype=np.float64))

    @property
    def count(self) -> int:
        return self.times.size


class FitzhughNagumoModel(TargetModel):
    """Posterior potential over theta = (a, b, c).

    Normal(0, 1/2) priors (variance 1/2) and a Gaussian likelihood with variance
    1/2 on both observed components; the Gaussian normalizing constants are
    kept in ``log_normalizer``.
    """

    def __init__(self, data: FitzhughNagumoData, max_step: float = MAX_STEP) -> None:
        if max_step <= 0.0:
            raise ValueError(f"max_step must be positive, got {max_step}")
        self.data = data
        self.max_step = max_step
        self.n = 3
        self.description = f"fitzhugh-nagumo ({data.count} observations)"
        self._initial_state = np.asarray(data.initial_state, dtype=np.float64)
        self._observations = np.column_stack([data.obs_v, data.obs_r])
        self.log_normalizer = 0.5 * self.n * np.log(
            2.0 * np.pi * PRIOR_VARIANCE
        ) + 0.5 * self._observations.size * np.log(2.0 * np.pi * LIKELIHOOD_VARIANCE)

    def solve(self, theta: np.ndarray) -> np.ndarray:
        """Trajectory (V, R) at the observation times, shape (count, 2)."""
        return self._solve(theta)[:, :2]

    def _solve(self, theta: np.ndarray) -> np.ndarray:
        theta = np.asarray(theta, dtype=np.float64)
        solution = solve_with_sensitivities(
            theta, self._initial_state, self.data.times, self.max_step
        )
        if not np.all(np.isfinite(solution)):
            raise ModelEvaluationError(theta, "ODE solution blew up")
        return solution

    def potential(self, q: np.ndarray) -> float:
        residuals = self._solve(q)[:, :2] - self._observations
        return float(
            q @ q / (2.0 * PRIOR_VARIANCE)
            + np.sum(residuals * residuals) / (2.0 * LIKELIHOOD_VARIANCE)
            + self.log_normalizer
        )

    def grad_potential(self, q: np.ndarray) -> np.ndarray:
        solution = self._solve(q)
        residuals = solution[:, :2] - self._observations
        sensitivities = solution[:, 2:].reshape(-1, 2, 3)
        misfit = np.einsum("ti,tij->j", residuals, sensitivities)
        return q / PRIOR_VARIANCE + misfit / LIKELIHOOD_VARIANCE


def fitzhugh_nagumo_model(data: FitzhughNagumoData) -> FitzhughNagumoModel:
    return FitzhughNagumoModel(data)


def simulate_fn_data(
    seed: int, count: int = 200, noiseless: bool = False
) -> FitzhughNagumoData:
    """Equispaced observations on [0, 10) of the true-parameter trajectory with
    additive N(0, 0.1^2) noise drawn from ``default_rng(seed)``."""
    if count < 1:
        raise ValueError(f"count must be at least 1, got {count}")
    times = np.linspace(0.0, TIME_HORIZON, count, endpoint=False)
    states = solve_with_sensitivities(
        np.asarray(TRUE_PARAMS), np.asarray(INITIAL_STATE), times, MAX_STEP
    )[:, :2]
    if not noiseless:
        rng = np.random.default_rng(seed)
        states = states + NOISE_SCALE * rng.standard_normal(states.shape)
    return FitzhughNagumoData(
        times=times,
        obs_v=states[:, 0],
        obs_r=states[:, 1],
        seed=seed,
        noiseless=noiseless,
    )


def sidecar_path(csv_path: Path) -> Path:
    return Path(csv_path).with_suffix(".json")


def save_fn_data(data: FitzhughNagumoData, csv_path: Path) -> None:
    """Write observations as CSV columns time,obsV,obsR plus a JSON sidecar."""
    csv_path = Path(csv_path)
    df = pd.DataFrame({"time": data.times, "obsV": data.obs_v, "obsR": data.obs_r})
    df.to_csv(csv_path, index=False, float_format="%.17g")
    sidecar = FnDataSidecar(
        seed=data.seed,
        initial_state=data.initial_state,
        true_params=data.true_params,
        sigma_noise=data.sigma_noise,
        noiseless=data.noiseless,
    )
    with open(sidecar_path(csv_path), "w") as f:
        json.dump(sidecar.model_dump(), f, indent=2)
    logger.info(f"Wrote {data.count} Fitzhugh-Nagumo observations to {csv_path}")


def load_fn_data(csv_path: Path) -> FitzhughNagumoData:
    csv_path = Path(csv_path)
    df = pd.read_csv(csv_path)
    missing = {"time", "obsV", "obsR"} - set(df.columns)
    if missing:
        raise ValueError(f"{csv_path} is missing columns {sorted(missing)}")
    with open(sidecar_path(csv_path), "r") as f:
        sidecar = FnDataSidecar(**json.load(f))
    return FitzhughNagumoData(
        times=df["time"].to_numpy(dtype=np.float64),
        obs_v=df["obsV"].to_numpy(dtype=np.float64),
        obs_r=df["obsR"].to_numpy(dtype=np.float64),
        sigma_noise=sidecar.sigma_noise,
        initial_state=sidecar.initial_state,
        true_params=sidecar.true_params,
        seed=sidecar.seed,
        noiseless=sidecar.noiseless,
    )
