"""
Gaussian and Gaussian-mixture targets used by the property tests, the binding
strength study and the trajectory figures.
"""

import logging

import numpy as np
from scipy.special import logsumexp, softmax

from noncanonical_hmc.models.base import TargetModel

logger = logging.getLogger(__name__)

MIXTURE_CENTERS = ((2.5, -2.5), (-2.5, 2.5))


class GaussianMixtureModel(TargetModel):
    """Equal-weight mixture of isotropic Gaussians N(c_i, variance Id).

    U(q) = -log sum_i (1 / K) N(q; c_i, variance Id), normalizing constants kept.
    """

    def __init__(self, centers: np.ndarray, variance: float = 1.0) -> None:
        centers = np.atleast_2d(np.asarray(centers, dtype=np.float64))
        if centers.size == 0:
            raise ValueError("A Gaussian mixture needs at least one center")
        if variance <= 0.0:
            raise ValueError(f"Mixture variance must be positive, got {variance}")
        self.centers = centers
        self.variance = float(variance)
        self.n = centers.shape[1]
        self.description = f"gaussian mixture ({centers.shape[0]} components)"
        self.log_normalizer = np.log(centers.shape[0]) + 0.5 * self.n * np.log(
            2.0 * np.pi * self.variance
        )

    def _component_logits(self, q: np.ndarray) -> np.ndarray:
        diff = q[None, :] - self.centers
        return -0.5 * np.sum(diff * diff, axis=1) / self.variance

    def potential(self, q: np.ndarray) -> float:
        return float(-logsumexp(self._component_logits(q)) + self.log_normalizer)

    def grad_potential(self, q: np.ndarray) -> np.ndarray:
        responsibilities = softmax(self._component_logits(q))
        return responsibilities @ (q[None, :] - self.centers) / self.variance


class QuadraticGaussianModel(TargetModel):
    """U(q) = q^T P q / 2 for a symmetric positive definite precision P.

    No normalizing constant is added, so U(0) = 0.
    """

    def __init__(self, precision: np.ndarray) -> None:
        precision = np.atleast_2d(np.asarray(precision, dtype=np.float64))
        if precision.shape[0] != precision.shape[1]:
            raise ValueError(f"Precision must be square, got {precision.shape}")
        if not np.allclose(precision, precision.T):
            raise ValueError("Precision must be symmetric")
        self.precision = precision
        self.n = precision.shape[0]
        self.description = f"quadratic gaussian (n={self.n})"

    def potential(self, q: np.ndarray) -> float:
        return float(0.5 * q @ self.precision @ q)

    def grad_potential(self, q: np.ndarray) -> np.ndarray:
        return self.precision @ q


def gaussian_mixture(centers, variance: float = 1.0) -> GaussianMixtureModel:
    return GaussianMixtureModel(np.asarray(centers, dtype=np.float64), variance)


def mixture_benchmark() -> GaussianMixtureModel:
    """Bivariate two-component mixture with unit variance used by the omega sweep."""
    return gaussian_mixture(MIXTURE_CENTERS, variance=1.0)


def standard_gaussian(n: int) -> QuadraticGaussianModel:
    if n < 1:
        raise ValueError(f"Dimension must be at least 1, got {n}")
    model = QuadraticGaussianModel(np.eye(n))
    model.description = f"standard gaussian (n={n})"
    return model
