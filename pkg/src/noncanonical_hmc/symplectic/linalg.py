"""Guarded dense linear algebra shared by the symplectic structures and bases."""

import logging

import numpy as np
import scipy.linalg

logger = logging.getLogger(__name__)

CONDITION_LIMIT = 1e12
SKEW_TOLERANCE = 1e-12


class DegenerateStructureError(Exception):
    """Exception raised when a symplectic or Poisson matrix is (numerically) singular."""

    def __init__(self, condition_number: float, detail: str | None = None) -> None:
        self.type = "DegenerateStructure"
        self.condition_number = condition_number
        message = f"Degenerate structure with condition number {condition_number:.3e}"
        if detail is not None:
            message = f"{message}: {detail}"
        super().__init__(message)


def max_abs(matrix: np.ndarray) -> float:
    """Largest absolute entry of a matrix, 0.0 for an empty matrix."""
    if matrix.size == 0:
        return 0.0
    return float(np.max(np.abs(matrix)))


def is_skew(matrix: np.ndarray, tol: float = SKEW_TOLERANCE) -> bool:
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        return False
    return max_abs(matrix + matrix.T) < tol


def skew_symmetrize(matrix: np.ndarray, k: int) -> np.ndarray:
    """Map a square matrix X to (X - X^T) / k."""
    if k < 1:
        raise ValueError(f"Skew-scale divisor must be a positive integer, got {k}")
    return (matrix - matrix.T) / k


def guarded_inverse(
    matrix: np.ndarray, condition_limit: float = CONDITION_LIMIT
) -> np.ndarray:
    """Invert a square matrix through an LU factorisation after a conditioning check.

    Parameters
    ----------
    matrix : np.ndarray
        Square matrix to invert.
    condition_limit : float, optional
        Largest accepted 2-norm condition number, by default CONDITION_LIMIT

    Returns
    -------
    np.ndarray
        The inverse matrix.

    Raises
    ------
    DegenerateStructureError
        If the condition number exceeds ``condition_limit`` or is not finite.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    condition_number = float(np.linalg.cond(matrix))
    if not np.isfinite(condition_number) or condition_number > condition_limit:
        raise DegenerateStructureError(condition_number)
    lu_and_pivots = scipy.linalg.lu_factor(matrix)
    return scipy.linalg.lu_solve(lu_and_pivots, np.eye(matrix.shape[0]))


def symmetric_sqrt(matrix: np.ndarray, strict: bool = True) -> np.ndarray:
    """Symmetric square root of a symmetric positive (semi-)definite matrix.

    The root is computed from the eigendecomposition ``V diag(w) V^T`` as
    ``V diag(sqrt(w)) V^T``.

    Parameters
    ----------
    matrix : np.ndarray
        Symmetric matrix.
    strict : bool, optional
        Require positive definiteness, by default True. When False, eigenvalues
        within round-off below zero are clipped to zero.

    Returns
    -------
    np.ndarray
        Symmetric matrix ``L`` with ``L @ L == matrix``.

    Raises
    ------
    ValueError
        If the matrix is not symmetric or not positive (semi-)definite.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    scale = max(max_abs(matrix), 1.0)
    if max_abs(matrix - matrix.T) > 1e-10 * scale:
        raise ValueError("Matrix square root requires a symmetric matrix")
    eigenvalues, eigenvectors = np.linalg.eigh(0.5 * (matrix + matrix.T))
    smallest = float(eigenvalues.min())
    if strict and smallest <= 0.0:
        raise ValueError(
            f"Matrix is not positive definite (smallest eigenvalue {smallest:.3e})"
        )
    if smallest < -1e-10 * scale:
        raise ValueError(
            f"Matrix is not positive semi-definite (smallest eigenvalue {smallest:.3e})"
        )
    roots = np.sqrt(np.clip(eigenvalues, 0.0, None))
    root = (eigenvectors * roots) @ eigenvectors.T
    return 0.5 * (root + root.T)


def is_positive_definite(matrix: np.ndarray) -> bool:
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        return False
    if max_abs(matrix - matrix.T) > 1e-10 * max(max_abs(matrix), 1.0):
        return False
    return bool(np.linalg.eigvalsh(0.5 * (matrix + matrix.T)).min() > 0.0)
