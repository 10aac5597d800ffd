"""
Implicit midpoint for X_H(z) = B DH(z) with an arbitrary constant Poisson matrix B.

The implicit relation z1 = z0 + eps X_H((z0 + z1) / 2) is solved by fixed-point
iteration started at z0.
"""

import logging
from typing import NamedTuple

import numpy as np

from noncanonical_hmc.config_models import IntegratorConfig
from noncanonical_hmc.integrators.base import TrajectoryResult, ensure_finite
from noncanonical_hmc.models.base import PhasePoint, TargetModel, grad_hamiltonian_at
from noncanonical_hmc.symplectic.structure import PoissonStructure, time_reversal

logger = logging.getLogger(__name__)


class MidpointStep(NamedTuple):
    point: PhasePoint
    converged: bool
    iterations: int


def _midpoint_solve(
    model: TargetModel,
    B: np.ndarray,
    z0: np.ndarray,
    cfg: IntegratorConfig,
    step: int = 1,
) -> tuple[np.ndarray, bool, int]:
    z = z0
    for iteration in range(1, cfg.fp_max_iters + 1):
        z_next = z0 + cfg.step_size * (B @ grad_hamiltonian_at(model, 0.5 * (z0 + z)))
        ensure_finite(z_next, "implicit midpoint", step)
        change = float(np.max(np.abs(z_next - z)))
        z = z_next
        if change < cfg.fp_tol:
            return z, True, iteration
    return z, False, cfg.fp_max_iters


def _check_dimension(model: TargetModel, structure: PoissonStructure) -> None:
    if structure.n != model.n:
        raise ValueError(
            f"Structure has n={structure.n}, model expects n={model.n}"
        )


def implicit_midpoint_step(
    model: TargetModel,
    structure: PoissonStructure,
    z: PhasePoint,
    cfg: IntegratorConfig,
) -> MidpointStep:
    """One implicit-midpoint step under ``structure``.

    Parameters
    ----------
    model : TargetModel
        Target defining H.
    structure : PoissonStructure
        Constant Poisson structure supplying B.
    z : PhasePoint
        Start point.
    cfg : IntegratorConfig
        Step size and fixed-point settings.

    Returns
    -------
    MidpointStep
        End point, whether the fixed-point iteration met ``fp_tol`` and the
        number of iterations used.

    Raises
    ------
    IntegrationError
        If an iterate is not finite.
    """
    _check_dimension(model, structure)
    z_new, converged, iterations = _midpoint_solve(model, structure.B, z.vector, cfg)
    return MidpointStep(PhasePoint.from_vector(z_new), converged, iterations)


def implicit_midpoint_path(
    model: TargetModel,
    structure: PoissonStructure,
    z: PhasePoint,
    cfg: IntegratorConfig,
) -> np.ndarray:
    _check_dimension(model, structure)
    path = [z.vector]
    for step in range(1, cfg.n_steps + 1):
        z_new, converged, _ = _midpoint_solve(model, structure.B, path[-1], cfg, step)
        if not converged:
            logger.warning(f"Fixed-point iteration did not converge at step {step}")
        path.append(z_new)
    return np.array(path)


def implicit_midpoint_trajectory(
    model: TargetModel,
    structure: PoissonStructure,
    z: PhasePoint,
    cfg: IntegratorConfig,
) -> TrajectoryResult:
    _check_dimension(model, structure)
    current = z.vector
    all_converged = True
    for step in range(1, cfg.n_steps + 1):
        current, converged, _ = _midpoint_solve(model, structure.B, current, cfg, step)
        all_converged = all_converged and converged
    return TrajectoryResult(
        point=PhasePoint.from_vector(current), converged=all_converged
    )


def reversal_roundtrip(
    model: TargetModel,
    structure: PoissonStructure,
    z: PhasePoint,
    cfg: IntegratorConfig,
) -> float:
    """Integrate forward, flip momentum, integrate under the time-reversal
    structure, flip again, and return the max-norm distance to the start."""
    forward = implicit_midpoint_trajectory(model, structure, z, cfg).point
    backward = implicit_midpoint_trajectory(
        model, time_reversal(structure), forward.flip_momentum(), cfg
    ).point
    return float(np.max(np.abs(backward.flip_momentum().vector - z.vector)))
