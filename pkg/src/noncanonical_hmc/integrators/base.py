import logging
from dataclasses import dataclass

import numpy as np

from noncanonical_hmc.models.base import PhasePoint, TargetModel, hamiltonian_at

logger = logging.getLogger(__name__)


class IntegrationError(Exception):
    """Exception raised when an integrator produces a non-finite iterate."""

    def __init__(self, integrator: str, step: int) -> None:
        self.type = "IntegrationError"
        self.integrator = integrator
        self.step = step
        super().__init__(f"{integrator} produced a non-finite state at step {step}")


@dataclass(frozen=True, eq=False)
class ExpandedPhasePoint:
    """Two copies (qt, pt) and (xt, yt) of a canonical-coordinate phase point."""

    qt: np.ndarray
    pt: np.ndarray
    xt: np.ndarray
    yt: np.ndarray

    def __post_init__(self) -> None:
        shapes = {np.shape(v) for v in (self.qt, self.pt, self.xt, self.yt)}
        if len(shapes) != 1 or len(shapes.pop()) != 1:
            raise ValueError("Expanded phase point needs four vectors of equal length")

    @classmethod
    def doubled(cls, z_tilde: np.ndarray) -> "ExpandedPhasePoint":
        n = len(z_tilde) // 2
        q, p = z_tilde[:n], z_tilde[n:]
        return cls(qt=q.copy(), pt=p.copy(), xt=q.copy(), yt=p.copy())

    @property
    def defect(self) -> float:
        """Distance between the two copies, max(|qt - xt|, |pt - yt|) in the max-norm."""
        return float(
            max(np.max(np.abs(self.qt - self.xt)), np.max(np.abs(self.pt - self.yt)))
        )

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(v)) for v in (self.qt, self.pt, self.xt, self.yt))


@dataclass(frozen=True, eq=False)
class TrajectoryResult:
    """Endpoint of an integrated trajectory.

    ``converged`` is False when any implicit solve hit its iteration cap and
    ``defect`` is the copy mismatch of the explicit integrator (0 otherwise).
    """

    point: PhasePoint
    converged: bool = True
    defect: float = 0.0


def ensure_finite(z: np.ndarray, integrator: str, step: int) -> np.ndarray:
    if not np.all(np.isfinite(z)):
        raise IntegrationError(integrator, step)
    return z


def path_energies(model: TargetModel, path: np.ndarray) -> np.ndarray:
    """Hamiltonian along a recorded path of flat phase-space vectors."""
    return np.array([hamiltonian_at(model, z) for z in path])
