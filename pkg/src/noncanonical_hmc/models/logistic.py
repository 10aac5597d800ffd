"""
Bayesian logistic regression with standard normal priors on the coefficients.
"""

import logging
from pathlib import Path

import numpy as np
import pandas as pd
import scipy.linalg
from scipy.special import expit, log_expit

from noncanonical_hmc.models.base import TargetModel
from noncanonical_hmc.symplectic.linalg import symmetric_sqrt

logger = logging.getLogger(__name__)

MODE_TOLERANCE = 1e-8
MODE_MAX_ITERATIONS = 200


class ConvergenceError(Exception):
    """Exception raised when the posterior mode search does not converge."""

    def __init__(self, gradient_norm: float, iterations: int) -> None:
        self.type = "ConvergenceError"
        self.gradient_norm = gradient_norm
        super().__init__(
            f"Newton mode search did not converge in {iterations} iterations "
            f"(gradient norm {gradient_norm:.3e})"
        )


class LogisticRegressionModel(TargetModel):
    """Negative log posterior of logistic regression.

    U(theta) = |theta|^2 / 2 - sum_i [y_i log s(x_i theta) + (1 - y_i) log s(-x_i theta)]
    with s the logistic sigmoid.
    """

    def __init__(
        self,
        X: np.ndarray,
        y: np.ndarray,
        description: str = "logistic regression",
        allow_empty: bool = False,
    ) -> None:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        y = np.asarray(y, dtype=np.float64).ravel()
        if X.shape[0] == 0 and not allow_empty:
            raise ValueError("Logistic regression needs at least one data row")
        if X.shape[0] != y.shape[0]:
            raise ValueError(
                f"Feature rows ({X.shape[0]}) and labels ({y.shape[0]}) differ"
            )
        if not np.all((y == 0.0) | (y == 1.0)):
            raise ValueError("Labels must be 0 or 1")
        self.X = X
        self.y = y
        self.n = X.shape[1]
        self.description = description
        self._mode: np.ndarray | None = None

    @classmethod
    def prior_only(cls, n: int) -> "LogisticRegressionModel":
        """Model without data; the posterior is the standard normal prior."""
        return cls(np.zeros((0, n)), np.zeros(0), "prior only", allow_empty=True)

    @property
    def n_train(self) -> int:
        return self.X.shape[0]

    def potential(self, q: np.ndarray) -> float:
        logits = self.X @ q
        log_likelihood = np.sum(
            self.y * log_expit(logits) + (1.0 - self.y) * log_expit(-logits)
        )
        return float(0.5 * q @ q - log_likelihood)

    def grad_potential(self, q: np.ndarray) -> np.ndarray:
        return q - self.X.T @ (self.y - expit(self.X @ q))

    def hessian(self, q: np.ndarray) -> np.ndarray:
        """Observed information: prior identity plus X^T diag(s (1 - s)) X."""
        s = expit(self.X @ q)
        return np.eye(self.n) + self.X.T @ (self.X * (s * (1.0 - s))[:, None])

    def find_mode(
        self, tol: float = MODE_TOLERANCE, max_iterations: int = MODE_MAX_ITERATIONS
    ) -> np.ndarray:
        """Posterior mode by damped Newton iteration from the origin.

        Parameters
        ----------
        tol : float, optional
            Gradient norm at which the search stops, by default MODE_TOLERANCE
        max_iterations : int, optional
            Newton iterations allowed, by default MODE_MAX_ITERATIONS

        Returns
        -------
        np.ndarray
            The mode.

        Raises
        ------
        ConvergenceError
            If the gradient norm is still above ``tol`` after ``max_iterations``.
        """
        if self._mode is not None:
            return self._mode.copy()
        theta = np.zeros(self.n)
        gradient = self.grad_potential(theta)
        for iteration in range(max_iterations):
            gradient_norm = float(np.linalg.norm(gradient))
            if gradient_norm < tol:
                logger.debug(f"Newton mode search converged after {iteration} steps")
                self._mode = theta
                return theta.copy()
            direction = scipy.linalg.solve(
                self.hessian(theta), gradient, assume_a="pos"
            )
            current = self.potential(theta)
            slope = float(gradient @ direction)
            step = 1.0
            # Armijo backtracking
            while step > 1e-10:
                candidate = theta - step * direction
                if self.potential(candidate) <= current - 1e-4 * step * slope:
                    break
                step *= 0.5
            theta = theta - step * direction
            gradient = self.grad_potential(theta)
            logger.debug(
                f"Newton step {iteration}: step length {step:.3g}, gradient norm "
                f"{np.linalg.norm(gradient):.3e}"
            )
        gradient_norm = float(np.linalg.norm(gradient))
        if gradient_norm < tol:
            self._mode = theta
            return theta.copy()
        logger.error(f"Newton mode search failed with gradient norm {gradient_norm}")
        raise ConvergenceError(gradient_norm, max_iterations)


def logistic_regression(X: np.ndarray, y: np.ndarray) -> LogisticRegressionModel:
    return LogisticRegressionModel(X, y)


def fisher_sqrt_at_mode(model: LogisticRegressionModel) -> np.ndarray:
    """Symmetric square root of the observed information at the posterior mode."""
    if not isinstance(model, LogisticRegressionModel):
        raise TypeError("Fisher square root is only defined for logistic regression")
    return symmetric_sqrt(model.hessian(model.find_mode()))


def standardize(features: np.ndarray) -> np.ndarray:
    """Scale every column to zero mean and unit variance.

    Constant columns are only centered.
    """
    features = np.asarray(features, dtype=np.float64)
    mean = features.mean(axis=0)
    std = features.std(axis=0)
    constant = std == 0.0
    if np.any(constant):
        logger.warning(f"{int(constant.sum())} constant feature column(s) left centered")
        std = np.where(constant, 1.0, std)
    return (features - mean) / std


def load_dataset(path: Path) -> tuple[np.ndarray, np.ndarray]:
    """Load a logistic-regression dataset from a CSV with header row.

    The last column holds the 0/1 label, all others are numeric features which
    are standardized.

    Parameters
    ----------
    path : Path
        The CSV file.

    Returns
    -------
    tuple[np.ndarray, np.ndarray]
        Standardized features and labels.
    """
    df = pd.read_csv(path)
    if df.shape[1] < 2:
        raise ValueError(f"Dataset {path} needs at least one feature and a label")
    if df.isna().any().any():
        raise ValueError(f"Dataset {path} contains missing values")
    labels = df.iloc[:, -1].to_numpy(dtype=np.float64)
    features = df.iloc[:, :-1].to_numpy(dtype=np.float64)
    logger.info(
        f"Loaded dataset {Path(path).name} with {features.shape[0]} rows and "
        f"{features.shape[1]} features"
    )
    return standardize(features), labels


def make_synthetic_logistic(seed: int, m: int, n: int) -> pd.DataFrame:
    """Draw a synthetic logistic-regression dataset.

    Features are standard normal, true coefficients N(0, 1) and labels
    Bernoulli(s(x theta)). Columns are x_1..x_n followed by y.
    """
    rng = np.random.default_rng(seed)
    features = rng.standard_normal((m, n))
    coefficients = rng.standard_normal(n)
    labels = (rng.uniform(size=m) < expit(features @ coefficients)).astype(int)
    df = pd.DataFrame(features, columns=[f"x_{i + 1}" for i in range(n)])
    df["y"] = labels
    return df
