import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from noncanonical_hmc.config_models import SamplerConfig
from noncanonical_hmc.diagnostics import DiagnosticsSummary, summarize
from noncanonical_hmc.models.base import TargetModel
from noncanonical_hmc.sampler.chain import ChainResult, Geometry, run_chain

logger = logging.getLogger(__name__)


class ExperimentError(Exception):
    """Exception raised when one of the chains of an experiment fails."""

    def __init__(self, chain_index: int, cause: Exception | str) -> None:
        self.type = "ExperimentError"
        self.chain_index = chain_index
        super().__init__(f"Chain {chain_index} failed: {cause}")


@dataclass(eq=False)
class ExperimentResult:
    chains: list[ChainResult]
    summary: DiagnosticsSummary
    wall_seconds: float


def chain_configs(base_cfg: SamplerConfig, n_chains: int) -> list[SamplerConfig]:
    """One config per chain, seeded chain_seed + i."""
    return [
        base_cfg.model_copy(update={"chain_seed": base_cfg.chain_seed + i})
        for i in range(n_chains)
    ]


def _run_indexed_chain(
    args: tuple[int, TargetModel, SamplerConfig, Geometry],
) -> tuple[int, ChainResult | None, str | None]:
    # failures travel back as text; domain exceptions do not survive pickling
    index, model, cfg, geometry = args
    try:
        return index, run_chain(model, cfg, geometry), None
    except Exception as e:
        logger.error(f"Chain {index} failed: {e}")
        return index, None, f"{type(e).__name__}: {e}"


def run_chains(
    model: TargetModel,
    cfgs: list[SamplerConfig],
    geometry: Geometry | None = None,
    workers: int = 1,
) -> list[ChainResult]:
    """Run one chain per config, in a process pool when ``workers > 1``.

    Results are ordered like ``cfgs`` regardless of the worker count.

    Raises
    ------
    ExperimentError
        If a chain fails; carries the index of its config.
    """
    tasks = [(i, model, cfg, geometry) for i, cfg in enumerate(cfgs)]
    if workers > 1 and len(tasks) > 1:
        logger.info(f"Running {len(tasks)} chains on {workers} worker processes")
        with ProcessPoolExecutor(max_workers=workers) as executor:
            outcomes = list(executor.map(_run_indexed_chain, tasks))
    else:
        outcomes = [_run_indexed_chain(task) for task in tasks]

    chains = []
    for index, chain, failure in outcomes:
        if failure is not None:
            raise ExperimentError(index, failure)
        chains.append(chain)
    return chains


def run_experiment(
    model: TargetModel,
    base_cfg: SamplerConfig,
    n_chains: int,
    compute_rhat: bool = True,
    workers: int = 1,
    geometry: Geometry | None = None,
) -> ExperimentResult:
    """Run ``n_chains`` independent chains and summarize them.

    The geometry (structure, time reversal, Darboux bases) is built once and
    shared. With ``workers > 1`` chains run in a process pool; results are
    always ordered by chain index.

    Parameters
    ----------
    model : TargetModel
        Target distribution.
    base_cfg : SamplerConfig
        Settings of chain 0; chain i uses seed ``base_cfg.chain_seed + i``.
    n_chains : int
        Number of chains.
    compute_rhat : bool, optional
        Whether R-hat is required, by default True. Requires two chains or more.
    workers : int, optional
        Number of worker processes, by default 1
    geometry : Geometry, optional
        Pre-built geometry, built from ``base_cfg`` when omitted.

    Returns
    -------
    ExperimentResult
        The chains and their diagnostics summary.

    Raises
    ------
    ExperimentError
        If a chain fails; carries the chain index.
    """
    if n_chains < 1:
        raise ValueError(f"n_chains must be at least 1, got {n_chains}")
    if compute_rhat and n_chains < 2:
        raise ValueError("R-hat requires at least two chains")
    geometry = geometry or Geometry.build(base_cfg)
    start = time.perf_counter()
    chains = run_chains(model, chain_configs(base_cfg, n_chains), geometry, workers)
    wall_seconds = time.perf_counter() - start

    summary = summarize(chains)
    rhat_text = "n/a" if summary.rhat_max is None else f"{summary.rhat_max:.4f}"
    logger.info(
        f"Experiment finished: ESS mean {summary.ess_mean:.1f}, ESS min "
        f"{summary.ess_min:.1f}, R-hat max {rhat_text}, acceptance "
        f"{summary.accept_rate:.3f}"
    )
    return ExperimentResult(chains=chains, summary=summary, wall_seconds=wall_seconds)
