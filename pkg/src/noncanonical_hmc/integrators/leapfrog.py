import logging

import numpy as np

from noncanonical_hmc.config_models import IntegratorConfig
from noncanonical_hmc.integrators.base import TrajectoryResult, ensure_finite
from noncanonical_hmc.models.base import PhasePoint, TargetModel, checked_gradient

logger = logging.getLogger(__name__)


def _leapfrog(
    model: TargetModel, q: np.ndarray, p: np.ndarray, epsilon: float, A: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    p_half = p - 0.5 * epsilon * (A @ checked_gradient(model, q))
    q_new = q + epsilon * (A @ p_half)
    p_new = p_half - 0.5 * epsilon * (A @ checked_gradient(model, q_new))
    return q_new, p_new


def leapfrog_step(
    model: TargetModel,
    z: PhasePoint,
    epsilon: float,
    A: np.ndarray | None = None,
) -> PhasePoint:
    """One leapfrog step: half kick, drift, half kick.

    With a symmetric positive definite ``A`` (the A block of a canonical-form
    Poisson structure) the flow q' = A p, p' = -A grad U is integrated; the
    default identity gives the textbook scheme. Two gradient evaluations.
    """
    A = np.eye(model.n) if A is None else A
    q, p = _leapfrog(model, z.q, z.p, epsilon, A)
    ensure_finite(np.concatenate([q, p]), "leapfrog", 1)
    return PhasePoint(q=q, p=p)


def leapfrog_path(
    model: TargetModel,
    z: PhasePoint,
    cfg: IntegratorConfig,
    A: np.ndarray | None = None,
) -> np.ndarray:
    """All n_steps + 1 states of a leapfrog trajectory as rows (q, p)."""
    A = np.eye(model.n) if A is None else A
    q, p = z.q, z.p
    path = [z.vector]
    for step in range(1, cfg.n_steps + 1):
        q, p = _leapfrog(model, q, p, cfg.step_size, A)
        path.append(ensure_finite(np.concatenate([q, p]), "leapfrog", step))
    return np.array(path)


def leapfrog_trajectory(
    model: TargetModel,
    z: PhasePoint,
    cfg: IntegratorConfig,
    A: np.ndarray | None = None,
) -> TrajectoryResult:
    A = np.eye(model.n) if A is None else A
    q, p = z.q, z.p
    for step in range(1, cfg.n_steps + 1):
        q, p = _leapfrog(model, q, p, cfg.step_size, A)
        ensure_finite(np.concatenate([q, p]), "leapfrog", step)
    return TrajectoryResult(point=PhasePoint(q=q, p=p))
