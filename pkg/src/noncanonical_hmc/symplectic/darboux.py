"""
Darboux bases: linear coordinates in which a constant symplectic matrix becomes
canonical, found either in closed form or by symplectic Gram-Schmidt.
"""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from noncanonical_hmc.config_models import VariantTag
from noncanonical_hmc.symplectic.linalg import (
    DegenerateStructureError,
    guarded_inverse,
    is_positive_definite,
    max_abs,
    symmetric_sqrt,
)
from noncanonical_hmc.symplectic.structure import (
    PoissonStructure,
    StructureVariant,
    canonical_symplectic,
)

logger = logging.getLogger(__name__)

CANONICALITY_TOLERANCE = 1e-9
PAIRING_TOLERANCE = 1e-12
MAX_REDRAWS = 100
DEFAULT_RESTARTS = 8


class UnsupportedVariantError(Exception):
    """Exception raised when no closed-form Darboux basis exists for a variant."""

    def __init__(self, tag: VariantTag, detail: str | None = None) -> None:
        self.type = "UnsupportedVariant"
        self.tag = tag
        message = f"No closed-form Darboux basis for variant '{tag.value}'"
        if detail is not None:
            message = f"{message}: {detail}"
        super().__init__(message)


@dataclass(frozen=True, eq=False)
class DarbouxBasis:
    """Columns of ``basisB`` are symplectic basis vectors, positions first.

    ``changeF`` maps non-canonical coordinates to canonical ones and ``basisB``
    maps back.
    """

    n: int
    basisB: np.ndarray
    changeF: np.ndarray

    @classmethod
    def from_matrix(cls, basisB: np.ndarray) -> "DarbouxBasis":
        basisB = np.array(basisB, dtype=np.float64)
        if basisB.ndim != 2 or basisB.shape[0] != basisB.shape[1] or basisB.shape[0] % 2:
            raise ValueError(f"Basis matrix must be 2n x 2n, got {basisB.shape}")
        return cls(
            n=basisB.shape[0] // 2, basisB=basisB, changeF=guarded_inverse(basisB)
        )

    def canonicality_residual(self, J: np.ndarray) -> float:
        """max |B^T J B - J_can|."""
        return max_abs(self.basisB.T @ J @ self.basisB - canonical_symplectic(self.n))

    def to_canonical(self, z: np.ndarray) -> np.ndarray:
        return self.changeF @ z

    def from_canonical(self, z_tilde: np.ndarray) -> np.ndarray:
        return self.basisB @ z_tilde


def poisson_from_basis(basis: DarbouxBasis) -> np.ndarray:
    """Poisson matrix B J_can B^T represented by a Darboux basis."""
    return basis.basisB @ canonical_symplectic(basis.n) @ basis.basisB.T


def _interleaved_to_blocked(n: int) -> np.ndarray:
    return np.concatenate([np.arange(0, 2 * n, 2), np.arange(1, 2 * n, 2)])


def _gram_schmidt_pass(
    J: np.ndarray, rng: np.random.Generator, max_redraws: int
) -> np.ndarray:
    dim = J.shape[0]
    n = dim // 2
    columns: list[np.ndarray] = []
    for i in range(n):
        if columns:
            span, _ = np.linalg.qr(J @ np.column_stack(columns))
        for attempt in range(max_redraws):
            w = rng.standard_normal(dim)
            v = rng.standard_normal(dim)
            if columns:
                w = w - span @ (span.T @ w)
                v = v - span @ (span.T @ v)
            pairing = float(v @ J @ w)
            if abs(pairing) >= PAIRING_TOLERANCE:
                break
            logger.warning(
                f"Degenerate pairing {pairing:.3e} for basis pair {i}, "
                f"redrawing (attempt {attempt + 1})"
            )
        else:
            raise DegenerateStructureError(
                float(np.linalg.cond(J)),
                f"no admissible basis pair after {max_redraws} redraws",
            )
        scale = np.sqrt(abs(pairing))
        columns.append(v * np.sign(pairing) / scale)
        columns.append(w / scale)
    return np.column_stack(columns)[:, _interleaved_to_blocked(n)]


def symplectic_gram_schmidt(
    J: np.ndarray,
    seed: int,
    restarts: int = DEFAULT_RESTARTS,
    max_redraws: int = MAX_REDRAWS,
) -> DarbouxBasis:
    """Find a Darboux basis of J by randomized symplectic Gram-Schmidt.

    Each pass draws standard normal pairs (w, v), projects them onto the
    orthogonal complement of J times the basis built so far, and scales them so
    that v^T J w = 1. The pass is repeated ``restarts`` times and the basis with
    the smallest Frobenius norm is kept.

    Parameters
    ----------
    J : np.ndarray
        Skew-symmetric invertible 2n x 2n matrix.
    seed : int
        Seed of the random stream; identical seeds give identical bases.
    restarts : int, optional
        Number of independent passes, by default DEFAULT_RESTARTS
    max_redraws : int, optional
        Redraws allowed per basis pair when |v^T J w| < 1e-12, by default MAX_REDRAWS

    Returns
    -------
    DarbouxBasis
        A basis with B^T J B = J_can to 1e-9.

    Raises
    ------
    ValueError
        If J is not an even-sized skew-symmetric matrix or restarts < 1.
    DegenerateStructureError
        If no pass yields a basis that passes the canonicality check.
    """
    J = np.asarray(J, dtype=np.float64)
    if J.ndim != 2 or J.shape[0] != J.shape[1] or J.shape[0] == 0 or J.shape[0] % 2:
        raise ValueError(f"Symplectic matrix must be 2n x 2n, got {J.shape}")
    if max_abs(J + J.T) > 1e-10 * max(max_abs(J), 1.0):
        raise ValueError("Symplectic matrix must be skew-symmetric")
    if restarts < 1:
        raise ValueError(f"restarts must be >= 1, got {restarts}")

    rng = np.random.default_rng(seed)
    best: DarbouxBasis | None = None
    best_norm = np.inf
    best_residual = np.inf
    for restart in range(restarts):
        basis = DarbouxBasis.from_matrix(_gram_schmidt_pass(J, rng, max_redraws))
        residual = basis.canonicality_residual(J)
        norm = float(np.linalg.norm(basis.basisB, "fro"))
        logger.debug(
            f"Gram-Schmidt restart {restart}: Frobenius norm {norm:.4f}, "
            f"residual {residual:.3e}"
        )
        best_residual = min(best_residual, residual)
        if residual < CANONICALITY_TOLERANCE and norm < best_norm:
            best, best_norm = basis, norm
    if best is None:
        raise DegenerateStructureError(
            float(np.linalg.cond(J)),
            f"best canonicality residual {best_residual:.3e} after {restarts} restarts",
        )
    logger.debug(f"Selected Gram-Schmidt basis with Frobenius norm {best_norm:.4f}")
    return best


def closed_form_basis(
    variant: StructureVariant, structure: PoissonStructure | None = None
) -> DarbouxBasis:
    """Darboux basis by inspection for the mass-preconditioned and magnetic-position
    families.

    Blocks are taken from the variant when it fixes them and from ``structure``
    otherwise. With L the symmetric square root of M:

    - mass-preconditioned: diag(L, L)
    - magnetic-position (A = Id): [[Id, 0], [G / 2, Id]]
    - magnetic-position-preconditioned: diag(L, L) [[Id, 0], [Q, Id]] with
      Q = L^-T G L^-1 / 2

    Parameters
    ----------
    variant : StructureVariant
        The structure family, possibly carrying M and G.
    structure : PoissonStructure, optional
        The structure to canonicalize; needed when the variant leaves blocks random.

    Returns
    -------
    DarbouxBasis
        The closed-form basis, checked against the structure's J.

    Raises
    ------
    UnsupportedVariantError
        If the variant has no closed form; use symplectic_gram_schmidt instead.
    ValueError
        If M is not positive definite or a required block is unavailable.
    """
    tag = variant.tag

    def block(name: str) -> np.ndarray:
        value = getattr(variant, name)
        if value is None and structure is not None:
            value = structure.A if name == "M" else getattr(structure, name)
        if value is None:
            raise ValueError(f"Closed-form basis for {tag.value} needs block {name}")
        return np.array(value, dtype=np.float64)

    if tag == VariantTag.MASS_PRECONDITIONED:
        M = block("M")
        n = M.shape[0]
        G = np.zeros((n, n))
    elif tag == VariantTag.MAGNETIC_POSITION:
        G = block("G")
        n = G.shape[0]
        A = variant.A if variant.A is not None else (
            structure.A if structure is not None else np.eye(n)
        )
        if max_abs(np.asarray(A) - np.eye(n)) > 0.0:
            raise UnsupportedVariantError(
                tag, "A must be the identity; use magnetic-position-preconditioned"
            )
        M = np.eye(n)
    elif tag == VariantTag.MAGNETIC_POSITION_PRECONDITIONED:
        M = block("M")
        G = block("G")
        n = M.shape[0]
    else:
        raise UnsupportedVariantError(tag)

    if not is_positive_definite(M):
        raise ValueError("Mass matrix M must be symmetric positive definite")
    L = symmetric_sqrt(M)
    L_inv = guarded_inverse(L)
    Q = L_inv.T @ G @ L_inv / 2.0
    identity = np.eye(n)
    shear = np.block([[identity, np.zeros((n, n))], [Q, identity]])
    basis = DarbouxBasis.from_matrix(scipy.linalg.block_diag(L, L) @ shear)

    target = structure
    if target is None:
        target = PoissonStructure.from_blocks(np.zeros((n, n)), M, G)
    residual = basis.canonicality_residual(target.J)
    if residual > CANONICALITY_TOLERANCE:
        raise DegenerateStructureError(
            target.condition_number,
            f"closed-form basis for {tag.value} has canonicality residual "
            f"{residual:.3e}",
        )
    return basis


def darboux_basis_for(
    structure: PoissonStructure, seed: int, restarts: int = DEFAULT_RESTARTS
) -> DarbouxBasis:
    """Closed-form basis when E = 0 and A is symmetric positive definite,
    symplectic Gram-Schmidt otherwise."""
    n = structure.n
    if not np.any(structure.E) and is_positive_definite(structure.A):
        if not np.any(structure.G):
            tag = VariantTag.MASS_PRECONDITIONED
        elif max_abs(structure.A - np.eye(n)) == 0.0:
            tag = VariantTag.MAGNETIC_POSITION
        else:
            tag = VariantTag.MAGNETIC_POSITION_PRECONDITIONED
        logger.debug(f"Using closed-form {tag.value} Darboux basis")
        return closed_form_basis(StructureVariant(tag=tag), structure)
    logger.debug("Falling back to symplectic Gram-Schmidt")
    return symplectic_gram_schmidt(structure.J, seed=seed, restarts=restarts)
