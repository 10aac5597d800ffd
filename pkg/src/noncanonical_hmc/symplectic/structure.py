"""
Constant Poisson structures B = [[E, A], [-A^T, G]] and their symplectic matrices.
"""

import logging
from dataclasses import dataclass

import numpy as np

from noncanonical_hmc.config_models import StructureSpec, VariantTag
from noncanonical_hmc.symplectic.linalg import (
    CONDITION_LIMIT,
    SKEW_TOLERANCE,
    DegenerateStructureError,
    guarded_inverse,
    is_skew,
    max_abs,
    skew_symmetrize,
)

logger = logging.getLogger(__name__)

INVERSE_TOLERANCE = 1e-10


def canonical_symplectic(n: int) -> np.ndarray:
    """Canonical symplectic matrix J_can = [[0, Id], [-Id, 0]] of size 2n."""
    if n < 1:
        raise ValueError(f"Invalid phase-space dimension n={n}, must be at least 1")
    identity = np.eye(n)
    zeros = np.zeros((n, n))
    return np.block([[zeros, identity], [-identity, zeros]])


@dataclass(frozen=True, eq=False)
class PoissonStructure:
    """A validated constant Poisson structure.

    Use ``PoissonStructure.from_blocks`` rather than the constructor; it checks
    skew-symmetry and non-degeneracy and derives ``B`` and ``J``.
    """

    n: int
    E: np.ndarray
    A: np.ndarray
    G: np.ndarray
    B: np.ndarray
    J: np.ndarray
    condition_number: float

    @classmethod
    def from_blocks(
        cls,
        E: np.ndarray,
        A: np.ndarray,
        G: np.ndarray,
        condition_limit: float = CONDITION_LIMIT,
    ) -> "PoissonStructure":
        E = np.array(E, dtype=np.float64)
        A = np.array(A, dtype=np.float64)
        G = np.array(G, dtype=np.float64)
        n = A.shape[0]
        if n < 1 or any(block.shape != (n, n) for block in (E, A, G)):
            raise ValueError(
                f"Blocks must all be n x n with n >= 1, got shapes "
                f"{E.shape}, {A.shape}, {G.shape}"
            )
        for name, block in (("E", E), ("G", G)):
            if not is_skew(block, SKEW_TOLERANCE):
                raise ValueError(
                    f"Block {name} is not skew-symmetric "
                    f"(max |{name} + {name}^T| = {max_abs(block + block.T):.3e})"
                )
        B = np.block([[E, A], [-A.T, G]])
        condition_number = float(np.linalg.cond(B))
        J = -guarded_inverse(B, condition_limit)
        # skew part only; removes round-off asymmetry of the LU inverse
        J = 0.5 * (J - J.T)
        residual = max_abs(J @ (-B) - np.eye(2 * n))
        if residual > INVERSE_TOLERANCE:
            raise DegenerateStructureError(
                condition_number, f"inverse residual {residual:.3e}"
            )
        logger.debug(
            f"Built Poisson structure with n={n}, condition number "
            f"{condition_number:.3e}"
        )
        return cls(n=n, E=E, A=A, G=G, B=B, J=J, condition_number=condition_number)

    @property
    def is_canonical_form(self) -> bool:
        """True when E and G vanish, so only the A block couples q and p."""
        return not np.any(self.E) and not np.any(self.G)


@dataclass(frozen=True, eq=False)
class StructureVariant:
    """A structure family plus whichever defining blocks the caller fixes.

    Blocks left as None are drawn at random (G*, E*, H*) or default to the
    identity (A*). ``k`` is the skew-scale divisor applied to random draws.
    """

    tag: VariantTag
    k: int = 1
    A: np.ndarray | None = None
    G: np.ndarray | None = None
    E: np.ndarray | None = None
    H: np.ndarray | None = None
    M: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError(f"Skew-scale divisor k must be >= 1, got {self.k}")

    @classmethod
    def from_spec(cls, spec: StructureSpec) -> "StructureVariant":
        def as_array(value):
            return None if value is None else np.array(value, dtype=np.float64)

        return cls(
            tag=spec.variant,
            k=spec.k,
            A=as_array(spec.A),
            G=as_array(spec.G),
            E=as_array(spec.E),
            H=as_array(spec.H),
            M=as_array(spec.M),
        )


def _user_block(block: np.ndarray, name: str, n: int) -> np.ndarray:
    if block.shape != (n, n):
        raise ValueError(f"Block {name} must be {n} x {n}, got {block.shape}")
    if not is_skew(block):
        raise ValueError(f"User-supplied block {name} is not skew-symmetric")
    return block


def _skew_block(
    block: np.ndarray | None, name: str, n: int, k: int, rng: np.random.Generator
) -> np.ndarray:
    if block is not None:
        return _user_block(block, name, n)
    return skew_symmetrize(rng.standard_normal((n, n)), k)


def build_structure(variant: StructureVariant, n: int, seed: int) -> PoissonStructure:
    """Assemble the Poisson structure of a variant.

    Random blocks are drawn from ``np.random.default_rng(seed)`` as a standard
    normal n x n matrix X and mapped to (X - X^T) / k, so identical
    (variant, n, seed) reproduce identical structures.

    Parameters
    ----------
    variant : StructureVariant
        The structure family and its fixed blocks.
    n : int
        Half the phase-space dimension.
    seed : int
        Seed of the stream used for random blocks.

    Returns
    -------
    PoissonStructure
        The validated structure.

    Raises
    ------
    ValueError
        If n < 1, a user block is not skew-symmetric or a required block is missing.
    DegenerateStructureError
        If the assembled Poisson matrix is singular.
    """
    if n < 1:
        raise ValueError(f"Invalid dimension n={n}, must be at least 1")
    rng = np.random.default_rng(seed)
    tag = variant.tag
    if tag == VariantTag.RANDOM_FULL:
        return random_poisson_structure(n, seed, variant.k)

    zeros = np.zeros((n, n))
    if variant.A is not None:
        A = np.array(variant.A, dtype=np.float64)
        if A.shape != (n, n):
            raise ValueError(f"Block A must be {n} x {n}, got {A.shape}")
    else:
        A = np.eye(n)

    if tag in (
        VariantTag.MASS_PRECONDITIONED,
        VariantTag.MAGNETIC_POSITION_PRECONDITIONED,
    ):
        if variant.M is None:
            raise ValueError(f"Variant {tag.value} requires a mass matrix M")
        A = np.array(variant.M, dtype=np.float64)

    if tag in (VariantTag.CANONICAL, VariantTag.MASS_PRECONDITIONED):
        E, G = zeros, zeros
    elif tag in (
        VariantTag.MAGNETIC_POSITION,
        VariantTag.MAGNETIC_POSITION_PRECONDITIONED,
    ):
        E = zeros
        G = _skew_block(variant.G, "G", n, variant.k, rng)
    elif tag == VariantTag.MAGNETIC_MOMENTUM:
        E = _skew_block(variant.E, "E", n, variant.k, rng)
        G = zeros
    elif tag == VariantTag.COUPLED_MAGNET:
        E = _skew_block(variant.H, "H", n, variant.k, rng)
        G = E.copy()
    else:
        raise ValueError(f"Unknown structure variant {tag}")

    logger.debug(f"Building {tag.value} structure with n={n}, k={variant.k}")
    return PoissonStructure.from_blocks(E, A, G)


def random_poisson_structure(n: int, seed: int, k: int = 1) -> PoissonStructure:
    """Fully non-canonical structure from a skew-symmetrized 2n x 2n normal matrix."""
    if n < 1:
        raise ValueError(f"Invalid dimension n={n}, must be at least 1")
    rng = np.random.default_rng(seed)
    B = skew_symmetrize(rng.standard_normal((2 * n, 2 * n)), k)
    return PoissonStructure.from_blocks(B[:n, :n], B[:n, n:], B[n:, n:])


def structure_from_spec(spec: StructureSpec, n: int) -> PoissonStructure:
    return build_structure(StructureVariant.from_spec(spec), n, spec.seed)


def time_reversal(structure: PoissonStructure) -> PoissonStructure:
    """Time-reversal partner with blocks (-E, A, -G).

    Integrating under the reversed structure after a momentum flip retraces the
    original trajectory.
    """
    return PoissonStructure.from_blocks(-structure.E, structure.A, -structure.G)
