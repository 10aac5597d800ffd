"""
Effective sample size, split-chain potential scale reduction and posterior summaries.
"""

import logging
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
import pandas as pd
import scipy.fft

logger = logging.getLogger(__name__)

MIN_ESS_LENGTH = 10
MIN_RHAT_LENGTH = 4


class DegenerateChainError(Exception):
    """Exception raised when chains carry no variance information."""

    def __init__(self, detail: str) -> None:
        self.type = "DegenerateChain"
        super().__init__(f"Degenerate chains: {detail}")


class EssEstimate(NamedTuple):
    value: float
    degenerate: bool


def autocorrelation(chain: np.ndarray) -> np.ndarray:
    """Normalized autocorrelation at lags 0..N-1 via a zero-padded FFT."""
    x = np.asarray(chain, dtype=np.float64)
    n = x.size
    centered = x - x.mean()
    size = scipy.fft.next_fast_len(2 * n)
    spectrum = scipy.fft.rfft(centered, size)
    autocovariance = scipy.fft.irfft(spectrum * np.conjugate(spectrum), size)[:n] / n
    return autocovariance / autocovariance[0]


def ess(chain: np.ndarray) -> EssEstimate:
    """Effective sample size by Geyer's initial positive sequence.

    Autocorrelations are summed in consecutive pairs until the first
    non-positive pair; pair sums are additionally forced to be non-increasing.
    The estimate is clamped to (0, N].

    Parameters
    ----------
    chain : np.ndarray
        One-dimensional chain of length at least 10.

    Returns
    -------
    EssEstimate
        The estimate and whether the chain was constant (then value = N).
    """
    x = np.asarray(chain, dtype=np.float64)
    if x.ndim != 1 or x.size < MIN_ESS_LENGTH:
        raise ValueError(
            f"ESS needs a one-dimensional chain of length >= {MIN_ESS_LENGTH}"
        )
    n = x.size
    if np.all(x == x[0]):
        return EssEstimate(float(n), True)
    rho = autocorrelation(x)
    pair_sums = rho[: 2 * (n // 2)].reshape(-1, 2).sum(axis=1)
    non_positive = np.flatnonzero(pair_sums <= 0.0)
    pair_sums = pair_sums[: non_positive[0] if non_positive.size else pair_sums.size]
    pair_sums = np.minimum.accumulate(pair_sums)
    tau = -1.0 + 2.0 * float(np.sum(pair_sums))
    if tau <= 0.0:
        return EssEstimate(float(n), False)
    return EssEstimate(float(min(n / tau, n)), False)


def rhat(chains: Sequence[np.ndarray]) -> float:
    """Split-chain potential scale reduction of a scalar quantity.

    Each chain is split in halves (the middle draw is dropped for odd
    lengths) and sqrt(((n - 1) / n W + B / n) / W) is computed over the halves.

    Raises
    ------
    ValueError
        With fewer than two chains, unequal lengths or length below 4.
    DegenerateChainError
        When all chains are identical or all halves are constant.
    """
    if len(chains) < 2:
        raise ValueError("R-hat needs at least two chains")
    lengths = {len(c) for c in chains}
    if len(lengths) != 1:
        raise ValueError(f"R-hat needs chains of equal length, got {sorted(lengths)}")
    length = lengths.pop()
    if length < MIN_RHAT_LENGTH:
        raise ValueError(f"R-hat needs chains of length >= {MIN_RHAT_LENGTH}")
    draws = np.array([np.asarray(c, dtype=np.float64) for c in chains])
    if np.all(draws == draws[0]):
        raise DegenerateChainError("all chains are identical")

    half = length // 2
    split = np.concatenate([draws[:, :half], draws[:, length - half :]], axis=0)
    within = float(np.mean(np.var(split, axis=1, ddof=1)))
    if within == 0.0:
        raise DegenerateChainError("zero within-chain variance")
    between = half * float(np.var(np.mean(split, axis=1), ddof=1))
    pooled = (half - 1) / half * within + between / half
    return float(np.sqrt(pooled / within))


@dataclass(frozen=True, eq=False)
class DiagnosticsSummary:
    """Per-coordinate diagnostics pooled over chains.

    ``rhat`` is None for a single chain and NaN for coordinates whose chains
    are degenerate.
    """

    ess: np.ndarray
    ess_mean: float
    ess_min: float
    ess_min_per_sec: float
    rhat: np.ndarray | None
    posterior_mean: np.ndarray
    posterior_std: np.ndarray
    posterior_median: np.ndarray
    degenerate: np.ndarray
    n_samples: int
    accept_rate: float
    wall_seconds: float
    gradient_evals: int

    @property
    def rhat_max(self) -> float | None:
        if self.rhat is None or np.all(np.isnan(self.rhat)):
            return None
        return float(np.nanmax(self.rhat))

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame(
            {
                "coordinate": [f"q_{i + 1}" for i in range(self.ess.size)],
                "ess": self.ess,
                "rhat": self.rhat if self.rhat is not None else np.nan,
                "mean": self.posterior_mean,
                "std": self.posterior_std,
                "median": self.posterior_median,
                "degenerate": self.degenerate,
            }
        )
        return df


def summarize(results: Sequence) -> DiagnosticsSummary:
    """Aggregate the chains of an experiment.

    Posterior mean, std and median are pooled over all chains. ESS is computed
    per chain and coordinate, averaged over chains, then reduced to mean and
    minimum over coordinates; ESS per second divides the minimum by the summed
    chain wall time.
    """
    if not results:
        raise ValueError("Cannot summarize an empty list of chains")
    dims = {r.samples.shape[1] for r in results}
    if len(dims) != 1:
        raise ValueError(f"Chains have different dimensions: {sorted(dims)}")
    dim = dims.pop()

    per_chain = [[ess(r.samples[:, j]) for j in range(dim)] for r in results]
    ess_values = np.array([[e.value for e in row] for row in per_chain]).mean(axis=0)
    degenerate = np.array([[e.degenerate for e in row] for row in per_chain]).any(
        axis=0
    )
    pooled = np.concatenate([r.samples for r in results], axis=0)

    rhat_values = None
    if len(results) >= 2 and len({r.n_samples for r in results}) == 1:
        rhat_values = np.full(dim, np.nan)
        for j in range(dim):
            try:
                rhat_values[j] = rhat([r.samples[:, j] for r in results])
            except DegenerateChainError as e:
                logger.warning(f"R-hat of coordinate {j + 1} skipped: {e}")

    wall_seconds = float(sum(r.wall_seconds for r in results))
    ess_min = float(ess_values.min())
    return DiagnosticsSummary(
        ess=ess_values,
        ess_mean=float(ess_values.mean()),
        ess_min=ess_min,
        ess_min_per_sec=ess_min / wall_seconds if wall_seconds > 0 else float("nan"),
        rhat=rhat_values,
        posterior_mean=pooled.mean(axis=0),
        posterior_std=pooled.std(axis=0),
        posterior_median=np.median(pooled, axis=0),
        degenerate=degenerate,
        n_samples=int(sum(r.n_samples for r in results)),
        accept_rate=float(np.mean(np.concatenate([r.accepted for r in results]))),
        wall_seconds=wall_seconds,
        gradient_evals=int(sum(r.gradient_evals for r in results)),
    )
