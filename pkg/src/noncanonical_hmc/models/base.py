import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)


class ModelEvaluationError(Exception):
    """Exception raised when a potential or its gradient is not finite."""

    def __init__(self, q: np.ndarray, detail: str = "non-finite potential") -> None:
        self.type = "ModelEvaluation"
        self.q = np.array(q, dtype=np.float64, copy=True)
        super().__init__(f"Model evaluation failed ({detail}) at q={self.q.tolist()}")


@dataclass(frozen=True, eq=False)
class PhasePoint:
    q: np.ndarray
    p: np.ndarray

    def __post_init__(self) -> None:
        q = np.array(self.q, dtype=np.float64)
        p = np.array(self.p, dtype=np.float64)
        if q.ndim != 1 or q.shape != p.shape:
            raise ValueError(
                f"Position and momentum must be vectors of equal length, "
                f"got shapes {q.shape} and {p.shape}"
            )
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
            raise ValueError("Phase point must be finite")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)

    @classmethod
    def from_vector(cls, z: np.ndarray) -> "PhasePoint":
        n = len(z) // 2
        return cls(q=z[:n], p=z[n:])

    @property
    def n(self) -> int:
        return len(self.q)

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.q, self.p])

    def flip_momentum(self) -> "PhasePoint":
        return PhasePoint(q=self.q, p=-self.p)


class TargetModel(ABC):
    """A differentiable potential U(q) defining H(q, p) = U(q) + p^T p / 2."""

    n: int
    description: str

    @abstractmethod
    def potential(self, q: np.ndarray) -> float: ...

    @abstractmethod
    def grad_potential(self, q: np.ndarray) -> np.ndarray: ...


class GradientCounter(TargetModel):
    """Wraps a model and counts potential and gradient evaluations."""

    def __init__(self, model: TargetModel) -> None:
        self.model = model
        self.n = model.n
        self.description = model.description
        self.potential_calls = 0
        self.gradient_calls = 0

    def potential(self, q: np.ndarray) -> float:
        self.potential_calls += 1
        return self.model.potential(q)

    def grad_potential(self, q: np.ndarray) -> np.ndarray:
        self.gradient_calls += 1
        return self.model.grad_potential(q)

    def reset(self) -> None:
        self.potential_calls = 0
        self.gradient_calls = 0


def checked_potential(model: TargetModel, q: np.ndarray) -> float:
    value = float(model.potential(q))
    if not np.isfinite(value):
        raise ModelEvaluationError(q)
    return value


def checked_gradient(model: TargetModel, q: np.ndarray) -> np.ndarray:
    gradient = np.asarray(model.grad_potential(q), dtype=np.float64)
    if not np.all(np.isfinite(gradient)):
        raise ModelEvaluationError(q, "non-finite gradient")
    return gradient


def hamiltonian_at(model: TargetModel, z: np.ndarray) -> float:
    """H at a flat phase-space vector z = (q, p)."""
    n = model.n
    p = z[n:]
    return checked_potential(model, z[:n]) + 0.5 * float(p @ p)


def grad_hamiltonian_at(model: TargetModel, z: np.ndarray) -> np.ndarray:
    """DH = (grad U(q), p) at a flat phase-space vector."""
    n = model.n
    return np.concatenate([checked_gradient(model, z[:n]), z[n:]])


def _check_dimension(model: TargetModel, z: PhasePoint) -> None:
    if z.n != model.n:
        raise ValueError(f"Phase point has n={z.n}, model expects n={model.n}")


def hamiltonian(model: TargetModel, z: PhasePoint) -> float:
    """Separable Hamiltonian U(q) + p^T p / 2.

    Raises
    ------
    ModelEvaluationError
        If the potential is not finite at q.
    """
    _check_dimension(model, z)
    return hamiltonian_at(model, z.vector)


def grad_hamiltonian(model: TargetModel, z: PhasePoint) -> np.ndarray:
    _check_dimension(model, z)
    return grad_hamiltonian_at(model, z.vector)
