"""
Explicit integrator for the (generally non-separable) Hamiltonian
H~(q~, p~) = H(B (q~, p~)) obtained in Darboux coordinates.

The phase space is doubled to (q~, p~, x~, y~) and the expanded Hamiltonian
H~(q~, y~) + H~(x~, p~) + omega (|q~ - x~|^2 + |p~ - y~|^2) / 2 is split into three
exactly solvable flows, composed symmetrically as
Phi1(eps/2) Phi2(eps/2) Phi3(eps) Phi2(eps/2) Phi1(eps/2).
"""

import logging

import numpy as np

from noncanonical_hmc.config_models import IntegratorConfig
from noncanonical_hmc.integrators.base import (
    ExpandedPhasePoint,
    IntegrationError,
    TrajectoryResult,
)
from noncanonical_hmc.models.base import PhasePoint, TargetModel, grad_hamiltonian_at
from noncanonical_hmc.symplectic.darboux import DarbouxBasis

logger = logging.getLogger(__name__)


def transformed_gradient(
    model: TargetModel, basis: DarbouxBasis, q_tilde: np.ndarray, p_tilde: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of H~ at (q~, p~) by the chain rule, B^T DH(B z~), split in halves."""
    gradient = basis.basisB.T @ grad_hamiltonian_at(
        model, basis.basisB @ np.concatenate([q_tilde, p_tilde])
    )
    n = len(q_tilde)
    return gradient[:n], gradient[n:]


def phi1(
    model: TargetModel, basis: DarbouxBasis, w: ExpandedPhasePoint, delta: float
) -> ExpandedPhasePoint:
    """Flow of H~(q~, y~): kicks p~ and drifts x~."""
    grad_q, grad_p = transformed_gradient(model, basis, w.qt, w.yt)
    return ExpandedPhasePoint(
        qt=w.qt, pt=w.pt - delta * grad_q, xt=w.xt + delta * grad_p, yt=w.yt
    )


def phi2(
    model: TargetModel, basis: DarbouxBasis, w: ExpandedPhasePoint, delta: float
) -> ExpandedPhasePoint:
    """Flow of H~(x~, p~): drifts q~ and kicks y~."""
    grad_q, grad_p = transformed_gradient(model, basis, w.xt, w.pt)
    return ExpandedPhasePoint(
        qt=w.qt + delta * grad_p, pt=w.pt, xt=w.xt, yt=w.yt - delta * grad_q
    )


def phi3(w: ExpandedPhasePoint, epsilon: float, omega: float) -> ExpandedPhasePoint:
    """Binding flow: rotates the copy differences by the angle 2 epsilon omega and
    keeps the copy sums."""
    cos = np.cos(2.0 * epsilon * omega)
    sin = np.sin(2.0 * epsilon * omega)
    sum_q, sum_p = w.qt + w.xt, w.pt + w.yt
    diff_q, diff_p = w.qt - w.xt, w.pt - w.yt
    rot_q = cos * diff_q + sin * diff_p
    rot_p = -sin * diff_q + cos * diff_p
    return ExpandedPhasePoint(
        qt=0.5 * (sum_q + rot_q),
        pt=0.5 * (sum_p + rot_p),
        xt=0.5 * (sum_q - rot_q),
        yt=0.5 * (sum_p - rot_p),
    )


def explicit_step(
    model: TargetModel,
    basis: DarbouxBasis,
    w: ExpandedPhasePoint,
    cfg: IntegratorConfig,
    step: int = 1,
) -> ExpandedPhasePoint:
    """One step of the symmetric composition; four gradient evaluations.

    Raises
    ------
    IntegrationError
        If the state becomes non-finite.
    """
    half = 0.5 * cfg.step_size
    w = phi1(model, basis, w, half)
    w = phi2(model, basis, w, half)
    w = phi3(w, cfg.step_size, cfg.omega)
    w = phi2(model, basis, w, half)
    w = phi1(model, basis, w, half)
    if not w.is_finite():
        raise IntegrationError("explicit", step)
    return w


def _check_dimension(model: TargetModel, basis: DarbouxBasis) -> None:
    if basis.n != model.n:
        raise ValueError(f"Basis has n={basis.n}, model expects n={model.n}")


def explicit_path(
    model: TargetModel, basis: DarbouxBasis, z: PhasePoint, cfg: IntegratorConfig
) -> tuple[np.ndarray, np.ndarray]:
    """States of an explicit trajectory in original and in canonical coordinates.

    Returns
    -------
    tuple[np.ndarray, np.ndarray]
        Rows (q, p) of the (q~, p~) copy mapped back through basisB, and the rows
        (q~, p~) themselves, each with n_steps + 1 rows.
    """
    _check_dimension(model, basis)
    w = ExpandedPhasePoint.doubled(basis.to_canonical(z.vector))
    canonical = [np.concatenate([w.qt, w.pt])]
    for step in range(1, cfg.n_steps + 1):
        w = explicit_step(model, basis, w, cfg, step)
        canonical.append(np.concatenate([w.qt, w.pt]))
    canonical = np.array(canonical)
    return canonical @ basis.basisB.T, canonical


def explicit_trajectory(
    model: TargetModel, basis: DarbouxBasis, z: PhasePoint, cfg: IntegratorConfig
) -> TrajectoryResult:
    """Lift z with changeF, run n_steps explicit steps on the doubled state and map
    the (q~, p~) copy back through basisB. The copy defect is reported alongside."""
    _check_dimension(model, basis)
    w = ExpandedPhasePoint.doubled(basis.to_canonical(z.vector))
    for step in range(1, cfg.n_steps + 1):
        w = explicit_step(model, basis, w, cfg, step)
    endpoint = basis.from_canonical(np.concatenate([w.qt, w.pt]))
    return TrajectoryResult(point=PhasePoint.from_vector(endpoint), defect=w.defect)
