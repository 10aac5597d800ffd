"""
A single non-canonical HMC Markov chain.
"""

import logging
import time
from dataclasses import dataclass

import numpy as np
import pandas as pd

from noncanonical_hmc.config_models import IntegratorKind, SamplerConfig
from noncanonical_hmc.integrators.base import IntegrationError, TrajectoryResult
from noncanonical_hmc.integrators.explicit import explicit_trajectory
from noncanonical_hmc.integrators.implicit_midpoint import implicit_midpoint_trajectory
from noncanonical_hmc.integrators.leapfrog import leapfrog_trajectory
from noncanonical_hmc.models.base import (
    GradientCounter,
    ModelEvaluationError,
    PhasePoint,
    TargetModel,
    hamiltonian,
)
from noncanonical_hmc.symplectic.darboux import DarbouxBasis, darboux_basis_for
from noncanonical_hmc.symplectic.structure import (
    PoissonStructure,
    structure_from_spec,
    time_reversal,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Geometry:
    """A structure, its time reversal and, for the explicit integrator, a Darboux
    basis of each. Built once and shared read-only between chains."""

    structure: PoissonStructure
    reversed_structure: PoissonStructure
    basis: DarbouxBasis | None = None
    reversed_basis: DarbouxBasis | None = None

    @classmethod
    def build(cls, cfg: SamplerConfig) -> "Geometry":
        structure = structure_from_spec(cfg.structure, cfg.dim)
        return cls.from_structure(
            structure,
            with_bases=cfg.integrator == IntegratorKind.EXPLICIT,
            seed=cfg.structure.seed,
            restarts=cfg.gram_schmidt_restarts,
        )

    @classmethod
    def from_structure(
        cls,
        structure: PoissonStructure,
        with_bases: bool,
        seed: int = 0,
        restarts: int = 8,
    ) -> "Geometry":
        reversed_structure = time_reversal(structure)
        basis = reversed_basis = None
        if with_bases:
            basis = darboux_basis_for(structure, seed=seed, restarts=restarts)
            reversed_basis = darboux_basis_for(
                reversed_structure, seed=seed, restarts=restarts
            )
        return cls(structure, reversed_structure, basis, reversed_basis)

    def select(self, reversed_: bool) -> tuple[PoissonStructure, DarbouxBasis | None]:
        if reversed_:
            return self.reversed_structure, self.reversed_basis
        return self.structure, self.basis


@dataclass(eq=False)
class ChainResult:
    """Output of one chain; row i describes iteration i.

    ``hamiltonians`` has columns (H before, H after) the proposal, with +inf
    after a failed proposal. ``defects`` holds the explicit integrator's copy
    defect per proposal (NaN for the other integrators or a failed proposal).
    """

    samples: np.ndarray
    momenta: np.ndarray
    hamiltonians: np.ndarray
    accepted: np.ndarray
    defects: np.ndarray
    wall_seconds: float
    gradient_evals: int
    unconverged: int
    chain_seed: int

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    @property
    def accept_rate(self) -> float:
        return float(np.mean(self.accepted))

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame(
            {
                "iteration": np.arange(self.n_samples),
                "accepted": self.accepted.astype(int),
                "H_before": self.hamiltonians[:, 0],
                "H_after": self.hamiltonians[:, 1],
            }
        )
        for i in range(self.dim):
            df[f"q_{i + 1}"] = self.samples[:, i]
        return df


def propose(
    model: TargetModel,
    integrator: IntegratorKind,
    structure: PoissonStructure,
    basis: DarbouxBasis | None,
    z: PhasePoint,
    cfg,
) -> TrajectoryResult:
    """Integrate one trajectory with the configured integrator."""
    if integrator == IntegratorKind.LEAPFROG:
        if not structure.is_canonical_form:
            raise ValueError("Leapfrog requires a canonical-form structure")
        return leapfrog_trajectory(model, z, cfg, A=structure.A)
    if integrator == IntegratorKind.IMPLICIT:
        return implicit_midpoint_trajectory(model, structure, z, cfg)
    if basis is None:
        raise ValueError("The explicit integrator needs a Darboux basis")
    return explicit_trajectory(model, basis, z, cfg)


def run_chain(
    model: TargetModel, cfg: SamplerConfig, geometry: Geometry | None = None
) -> ChainResult:
    """Run one chain of non-canonical HMC.

    Every iteration draws p ~ N(0, Id) from ``default_rng(cfg.chain_seed)``,
    integrates a proposal, then draws u ~ U(0, 1) and accepts iff
    log u < min(0, H - H'). Failed or unconverged proposals count as H' = +inf.
    On rejection with ``flip_on_reject`` the chain switches persistently between
    the structure and its time reversal and negates the step size.

    Parameters
    ----------
    model : TargetModel
        Target distribution.
    cfg : SamplerConfig
        Chain settings.
    geometry : Geometry, optional
        Pre-built structures and bases, built from ``cfg`` when omitted.

    Returns
    -------
    ChainResult
        Retained positions and momenta per iteration plus bookkeeping.

    Raises
    ------
    ValueError
        If model, structure and initial point dimensions disagree.
    """
    if model.n != cfg.dim:
        raise ValueError(
            f"Initial point has dimension {cfg.dim}, model expects {model.n}"
        )
    geometry = geometry or Geometry.build(cfg)
    if geometry.structure.n != model.n:
        raise ValueError(
            f"Structure has n={geometry.structure.n}, model expects n={model.n}"
        )
    if cfg.integrator == IntegratorKind.LEAPFROG and not (
        geometry.structure.is_canonical_form
    ):
        raise ValueError("Leapfrog requires a canonical-form structure")

    counter = GradientCounter(model)
    rng = np.random.default_rng(cfg.chain_seed)
    n, n_samples = model.n, cfg.n_samples
    samples = np.empty((n_samples, n))
    momenta = np.empty((n_samples, n))
    hamiltonians = np.empty((n_samples, 2))
    accepted = np.zeros(n_samples, dtype=bool)
    defects = np.full(n_samples, np.nan)
    unconverged = 0

    q = np.asarray(cfg.initial_q, dtype=np.float64)
    integration = cfg.integration
    reversed_ = False
    logger.info(
        f"Starting chain (seed {cfg.chain_seed}) with {cfg.integrator.value} "
        f"integrator on {cfg.structure.variant.value} structure, "
        f"{n_samples} samples"
    )
    start = time.perf_counter()
    for i in range(n_samples):
        z = PhasePoint(q=q, p=rng.standard_normal(n))
        h_before = hamiltonian(counter, z)
        structure, basis = geometry.select(reversed_)
        try:
            result = propose(counter, cfg.integrator, structure, basis, z, integration)
            if result.converged:
                h_after = hamiltonian(counter, result.point)
            else:
                unconverged += 1
                h_after = np.inf
            if cfg.integrator == IntegratorKind.EXPLICIT:
                defects[i] = result.defect
        except (ModelEvaluationError, IntegrationError) as e:
            logger.debug(f"Proposal {i} failed and is rejected: {e}")
            result = None
            h_after = np.inf
        if not np.isfinite(h_after):
            h_after = np.inf

        log_accept = min(0.0, h_before - h_after)
        u = rng.uniform()
        if np.log(u) < log_accept:
            accepted[i] = True
            q = result.point.q
            p = result.point.p
        else:
            p = z.p
            if cfg.flip_on_reject:
                reversed_ = not reversed_
                integration = integration.model_copy(
                    update={"step_size": -integration.step_size}
                )
        samples[i] = q
        momenta[i] = p
        hamiltonians[i] = (h_before, h_after)
    wall_seconds = time.perf_counter() - start

    chain = ChainResult(
        samples=samples,
        momenta=momenta,
        hamiltonians=hamiltonians,
        accepted=accepted,
        defects=defects,
        wall_seconds=wall_seconds,
        gradient_evals=counter.gradient_calls,
        unconverged=unconverged,
        chain_seed=cfg.chain_seed,
    )
    logger.info(
        f"Finished chain (seed {cfg.chain_seed}): acceptance rate "
        f"{chain.accept_rate:.3f}, {unconverged} unconverged solves, "
        f"{wall_seconds:.2f} s"
    )
    return chain
