"""
Run directories and the CSV/JSON files written into them.
"""

import json
import logging
import shutil
import tempfile
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator

import numpy as np
import pandas as pd
from pydantic import BaseModel

from noncanonical_hmc.experiments.pydantic_models import ErrorMessage
from noncanonical_hmc.sampler.chain import ChainResult

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
FAILED_MARKER = ".failed"
MANIFEST_NAME = "manifest.json"
SUMMARY_NAME = "summary.json"


@contextmanager
def run_directory(target: Path) -> Iterator[Path]:
    """Yield a staging directory that replaces ``target`` only on success.

    On failure ``target`` is left containing only a ``.failed`` marker with the
    error, so no partial results are ever visible.
    """
    target = Path(target)
    target.parent.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=f".{target.name}.", dir=target.parent))
    try:
        yield staging
    except Exception as e:
        shutil.rmtree(staging, ignore_errors=True)
        if target.exists():
            shutil.rmtree(target)
        target.mkdir()
        error = ErrorMessage(
            error=getattr(e, "type", type(e).__name__), message=str(e)
        )
        (target / FAILED_MARKER).write_text(error.model_dump_json())
        logger.error(f"Run failed, wrote marker to {target / FAILED_MARKER}")
        raise
    if target.exists():
        logger.warning(f"Replacing existing run directory {target}")
        shutil.rmtree(target)
    staging.rename(target)
    logger.info(f"Wrote run directory {target}")


def write_json(path: Path, document: BaseModel) -> None:
    with open(path, "w") as f:
        json.dump(document.model_dump(mode="json"), f, indent=2)
        f.write("\n")


def write_frame(path: Path, df: pd.DataFrame) -> None:
    df.to_csv(path, index=False, float_format=FLOAT_FORMAT)


def chain_file(directory: Path, index: int) -> Path:
    return Path(directory) / f"chain_{index}.csv"


def write_chains(directory: Path, chains: list[ChainResult]) -> None:
    for i, chain in enumerate(chains):
        write_frame(chain_file(directory, i), chain.to_frame())


def read_chain_csv(path: Path) -> ChainResult:
    """Rebuild a ChainResult from a chain CSV; momenta and timing are not stored."""
    df = pd.read_csv(path)
    q_columns = [c for c in df.columns if c.startswith("q_")]
    if not q_columns:
        raise ValueError(f"{path} has no q_ columns")
    samples = df[q_columns].to_numpy(dtype=np.float64)
    return ChainResult(
        samples=samples,
        momenta=np.full_like(samples, np.nan),
        hamiltonians=df[["H_before", "H_after"]].to_numpy(dtype=np.float64),
        accepted=df["accepted"].to_numpy().astype(bool),
        defects=np.full(len(df), np.nan),
        wall_seconds=0.0,
        gradient_evals=0,
        unconverged=0,
        chain_seed=-1,
    )


def trajectory_frame(
    path: np.ndarray, energies: np.ndarray, step_size: float
) -> pd.DataFrame:
    """Trajectory dump with columns step, t, q_1..q_n, p_1..p_n, H."""
    n = path.shape[1] // 2
    df = pd.DataFrame({"step": np.arange(path.shape[0])})
    df["t"] = df["step"] * step_size
    for i in range(n):
        df[f"q_{i + 1}"] = path[:, i]
    for i in range(n):
        df[f"p_{i + 1}"] = path[:, n + i]
    df["H"] = energies
    return df
