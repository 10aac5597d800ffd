"""
Back end of the command-line subcommands. Each cmd_* function writes one run
directory and returns its path.
"""

import logging
from pathlib import Path

import numpy as np
import pandas as pd

from noncanonical_hmc.config import (
    get_current_version,
    get_output_root,
    load_protocol_config,
)
from noncanonical_hmc.config_models import (
    ExperimentSpec,
    IntegratorConfig,
    IntegratorKind,
    SamplerConfig,
    StructureSpec,
    Task,
    VariantTag,
)
from noncanonical_hmc.diagnostics import DiagnosticsSummary, summarize
from noncanonical_hmc.experiments.output import (
    MANIFEST_NAME,
    SUMMARY_NAME,
    read_chain_csv,
    run_directory,
    trajectory_frame,
    write_chains,
    write_frame,
    write_json,
)
from noncanonical_hmc.experiments.protocols import (
    build_task,
    resolve_spec,
    sampler_config,
)
from noncanonical_hmc.experiments.pydantic_models import (
    ExperimentSummary,
    RunManifest,
    StructureDocument,
    SweepSummary,
)
from noncanonical_hmc.integrators.base import path_energies
from noncanonical_hmc.integrators.implicit_midpoint import implicit_midpoint_path
from noncanonical_hmc.models.base import PhasePoint
from noncanonical_hmc.models.fitzhugh_nagumo import save_fn_data, simulate_fn_data
from noncanonical_hmc.models.gaussian import mixture_benchmark, standard_gaussian
from noncanonical_hmc.sampler.chain import Geometry
from noncanonical_hmc.sampler.experiment import run_chains, run_experiment
from noncanonical_hmc.symplectic.darboux import DarbouxBasis, darboux_basis_for
from noncanonical_hmc.symplectic.structure import (
    PoissonStructure,
    structure_from_spec,
)

logger = logging.getLogger(__name__)

SWEEP_DIM = 2
# expected log-log slope of the copy defect against omega, around -1/2
DEFECT_SLOPE_BAND = (-0.7, -0.3)
# median explicit/implicit discrepancy allowed at omega = 1
DISCREPANCY_TOLERANCE = 1e-2
TRAJECTORY_STRUCTURES = {
    "canonical": VariantTag.CANONICAL,
    "magnetic": VariantTag.MAGNETIC_POSITION,
    "noncanonical": VariantTag.RANDOM_FULL,
}


def structure_document(
    structure: PoissonStructure, basis: DarbouxBasis | None = None
) -> StructureDocument:
    return StructureDocument(
        n=structure.n,
        E=structure.E.tolist(),
        A=structure.A.tolist(),
        G=structure.G.tolist(),
        basisB=None if basis is None else basis.basisB.tolist(),
    )


def run_name(spec: ExperimentSpec) -> str:
    parts = [spec.task.value]
    if spec.method is not None and spec.task not in (Task.OMEGA_SWEEP, Task.TRAJECTORY):
        parts.append(spec.method.value)
    parts.append(f"s{spec.seed}")
    if spec.task not in (Task.TRAJECTORY,):
        parts.append(f"c{spec.chain_seed}")
    return "-".join(parts)


def _target_directory(spec: ExperimentSpec) -> Path:
    root = spec.output_dir if spec.output_dir is not None else get_output_root()
    return Path(root) / run_name(spec)


def _manifest(spec: ExperimentSpec, derived: dict) -> RunManifest:
    # the output location is not part of the experiment
    return RunManifest(
        spec=spec.model_copy(update={"output_dir": None}),
        version=f"v{get_current_version()}",
        derived=derived,
    )


def cmd_sample(spec: ExperimentSpec) -> Path:
    """Run a sampling experiment and write chains, diagnostics and manifest.

    Parameters
    ----------
    spec : ExperimentSpec
        Task, method and any overrides of the task protocol.

    Returns
    -------
    Path
        The run directory holding manifest.json, summary.json, diagnostics.csv,
        structure.json and one chain_<i>.csv per chain.
    """
    if spec.task in (Task.OMEGA_SWEEP, Task.TRAJECTORY):
        raise ValueError(f"Task '{spec.task.value}' has its own subcommand")
    protocol = load_protocol_config()
    setup = build_task(spec)
    resolved = resolve_spec(spec, protocol, n_train=setup.derived.get("n_train"))
    cfg = sampler_config(resolved, setup, protocol)
    derived = dict(setup.derived)
    derived["step_size"] = resolved.step_size

    target = _target_directory(resolved)
    logger.info(
        f"Sampling task '{resolved.task.value}' with method "
        f"'{resolved.method.value}' into {target}"
    )
    with run_directory(target) as staging:
        write_json(staging / MANIFEST_NAME, _manifest(resolved, derived))
        geometry = Geometry.build(cfg)
        write_json(
            staging / "structure.json",
            structure_document(geometry.structure, geometry.basis),
        )
        result = run_experiment(
            setup.model,
            cfg,
            n_chains=resolved.n_chains,
            compute_rhat=resolved.n_chains >= 2,
            workers=resolved.workers,
            geometry=geometry,
        )
        write_chains(staging, result.chains)
        write_frame(staging / "diagnostics.csv", result.summary.to_frame())
        write_json(
            staging / SUMMARY_NAME,
            summary_document(resolved.method.value, result.summary),
        )
    return target


def summary_document(method: str, summary: DiagnosticsSummary) -> ExperimentSummary:
    return ExperimentSummary(
        method=method,
        ess_mean=summary.ess_mean,
        ess_min=summary.ess_min,
        ess_min_per_sec=summary.ess_min_per_sec,
        rhat_max=summary.rhat_max,
        accept_rate=summary.accept_rate,
        wall_seconds=summary.wall_seconds,
        gradient_evals=summary.gradient_evals,
    )


def cmd_omega_sweep(spec: ExperimentSpec) -> Path:
    """Compare explicit and implicit chains on the two-component mixture over a
    grid of binding strengths.

    Both chains share the chain seed and therefore their momentum and uniform
    draws. The implicit chain does not depend on omega and is run once. For each
    omega the per-sample discrepancy max |q_explicit - q_implicit| and the mean
    copy defect of the explicit integrator are recorded. ``sweep_summary.json``
    holds the log-log slope of the mean defect against omega, whether it falls
    in ``DEFECT_SLOPE_BAND``, and whether the median discrepancy at omega = 1
    is below ``DISCREPANCY_TOLERANCE``.
    """
    protocol = load_protocol_config()
    resolved = resolve_spec(spec.model_copy(update={"task": Task.OMEGA_SWEEP}), protocol)
    model = mixture_benchmark()
    structure = StructureSpec(
        variant=VariantTag.RANDOM_FULL, seed=resolved.seed, k=resolved.k
    )
    base = dict(
        structure=structure,
        n_samples=resolved.n_samples,
        chain_seed=resolved.chain_seed,
        initial_q=[0.0] * SWEEP_DIM,
        gram_schmidt_restarts=protocol.gram_schmidt_restarts,
    )
    implicit_cfg = SamplerConfig(
        integrator=IntegratorKind.IMPLICIT,
        integration=IntegratorConfig(
            step_size=resolved.step_size, n_steps=resolved.n_steps
        ),
        **base,
    )
    explicit_cfgs = [
        SamplerConfig(
            integrator=IntegratorKind.EXPLICIT,
            integration=IntegratorConfig(
                step_size=resolved.step_size, n_steps=resolved.n_steps, omega=omega
            ),
            **base,
        )
        for omega in resolved.omegas
    ]
    geometry = Geometry.from_structure(
        structure_from_spec(structure, SWEEP_DIM),
        with_bases=True,
        seed=resolved.seed,
        restarts=protocol.gram_schmidt_restarts,
    )

    target = _target_directory(resolved)
    with run_directory(target) as staging:
        write_json(staging / MANIFEST_NAME, _manifest(resolved, {}))
        write_json(
            staging / "structure.json",
            structure_document(geometry.structure, geometry.basis),
        )
        chains = run_chains(
            model, [implicit_cfg] + explicit_cfgs, geometry, resolved.workers
        )
        implicit, explicit = chains[0], chains[1:]
        write_frame(staging / "chain_implicit.csv", implicit.to_frame())
        rows = []
        for i, (omega, chain) in enumerate(zip(resolved.omegas, explicit)):
            write_frame(staging / f"chain_explicit_{i}.csv", chain.to_frame())
            discrepancy = np.max(np.abs(chain.samples - implicit.samples), axis=1)
            rows.append(
                {
                    "omega": omega,
                    "discrepancy_median": float(np.median(discrepancy)),
                    "discrepancy_mean": float(np.mean(discrepancy)),
                    "discrepancy_max": float(np.max(discrepancy)),
                    "defect_mean": float(np.nanmean(chain.defects)),
                    "accept_rate_explicit": chain.accept_rate,
                    "accept_rate_implicit": implicit.accept_rate,
                }
            )
        sweep = pd.DataFrame(rows)
        write_frame(staging / "omega_sweep.csv", sweep)
        write_json(staging / "sweep_summary.json", sweep_summary(sweep))
    return target


def defect_slope(omegas: np.ndarray, defects: np.ndarray) -> float:
    """Least-squares slope of log(defect) against log(omega)."""
    keep = np.isfinite(defects) & (defects > 0.0)
    if keep.sum() < 2:
        return float("nan")
    slope, _ = np.polyfit(np.log(omegas[keep]), np.log(defects[keep]), 1)
    return float(slope)


def slope_within_band(
    slope: float, band: tuple[float, float] = DEFECT_SLOPE_BAND
) -> bool | None:
    """Whether a defect slope lies in ``band``; None for an undefined slope."""
    if not np.isfinite(slope):
        return None
    low, high = band
    return bool(low <= slope <= high)


def sweep_summary(
    sweep: pd.DataFrame, tolerance: float = DISCREPANCY_TOLERANCE
) -> SweepSummary:
    """Evaluate the sweep table against the defect slope band and the omega = 1
    agreement tolerance, logging a warning for every check that fails.

    Parameters
    ----------
    sweep : pd.DataFrame
        One row per omega with at least the ``omega``, ``defect_mean`` and
        ``discrepancy_median`` columns.
    tolerance : float
        Largest median discrepancy accepted at omega = 1.

    Returns
    -------
    SweepSummary
    """
    omegas = sweep["omega"].to_numpy(dtype=np.float64)
    slope = defect_slope(omegas, sweep["defect_mean"].to_numpy(dtype=np.float64))
    within = slope_within_band(slope)
    low, high = DEFECT_SLOPE_BAND
    if within is None:
        logger.warning("Copy defect slope is undefined for this omega grid")
    elif within:
        logger.info(f"Log-log slope of the copy defect against omega: {slope:.3f}")
    else:
        logger.warning(
            f"Log-log slope of the copy defect against omega is {slope:.3f}, "
            f"outside [{low}, {high}]"
        )

    unit = sweep.loc[np.isclose(omegas, 1.0), "discrepancy_median"]
    agreement = None
    if unit.empty:
        logger.info("Omega = 1 is not on the grid, agreement check skipped")
    else:
        median = float(unit.iloc[0])
        agreement = bool(median < tolerance)
        if not agreement:
            logger.warning(
                f"Median explicit/implicit discrepancy at omega = 1 is {median:.3e}, "
                f"above {tolerance:.0e}"
            )

    return SweepSummary(
        omegas=omegas.tolist(),
        defect_slope=slope,
        defect_slope_band=DEFECT_SLOPE_BAND,
        defect_slope_within_band=within,
        discrepancy_median=sweep["discrepancy_median"].tolist(),
        discrepancy_tolerance=tolerance,
        unit_omega_agreement=agreement,
    )


def cmd_trajectory(spec: ExperimentSpec) -> Path:
    """Write implicit-midpoint traces of a quadratic Gaussian Hamiltonian under a
    canonical, a magnetic and a fully non-canonical structure, plus the
    non-canonical trace expressed in its Darboux coordinates."""
    protocol = load_protocol_config()
    resolved = resolve_spec(spec.model_copy(update={"task": Task.TRAJECTORY}), protocol)
    dim = resolved.dim or 2
    model = standard_gaussian(dim)
    q0 = np.zeros(dim)
    p0 = np.zeros(dim)
    q0[0] = 1.0
    p0[1 % dim] = 1.0
    start = PhasePoint(q=q0, p=p0)
    cfg = IntegratorConfig(step_size=resolved.step_size, n_steps=resolved.n_steps)

    target = _target_directory(resolved)
    with run_directory(target) as staging:
        write_json(staging / MANIFEST_NAME, _manifest(resolved, {}))
        for name, variant in TRAJECTORY_STRUCTURES.items():
            structure = structure_from_spec(
                StructureSpec(variant=variant, seed=resolved.seed, k=resolved.k), dim
            )
            path = implicit_midpoint_path(model, structure, start, cfg)
            energies = path_energies(model, path)
            write_frame(
                staging / f"trajectory_{name}.csv",
                trajectory_frame(path, energies, resolved.step_size),
            )
            if variant == VariantTag.RANDOM_FULL:
                basis = darboux_basis_for(
                    structure, seed=resolved.seed, restarts=protocol.gram_schmidt_restarts
                )
                write_frame(
                    staging / f"trajectory_{name}_darboux.csv",
                    trajectory_frame(
                        path @ basis.changeF.T, energies, resolved.step_size
                    ),
                )
                write_json(
                    staging / "structure.json", structure_document(structure, basis)
                )
    return target


def cmd_fn_data(seed: int, count: int, path: Path, noiseless: bool = False) -> Path:
    data = simulate_fn_data(seed, count, noiseless=noiseless)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    save_fn_data(data, path)
    return path


def cmd_diagnose(run_dir: Path) -> DiagnosticsSummary:
    """Recompute diagnostics from the chain CSVs of a run directory.

    Wall time is taken from summary.json when present.
    """
    run_dir = Path(run_dir)
    indexed = []
    for path in run_dir.glob("chain_*.csv"):
        suffix = path.stem.removeprefix("chain_")
        if suffix.isdigit():
            indexed.append((int(suffix), path))
    if not indexed:
        raise FileNotFoundError(f"No chain_<i>.csv files in {run_dir}")
    chains = [read_chain_csv(path) for _, path in sorted(indexed)]
    summary_path = run_dir / SUMMARY_NAME
    if summary_path.exists():
        wall_seconds = ExperimentSummary.model_validate_json(
            summary_path.read_text()
        ).wall_seconds
        for chain in chains:
            chain.wall_seconds = wall_seconds / len(chains)
    return summarize(chains)
