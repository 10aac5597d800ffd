import logging
from collections.abc import Sequence
from pathlib import Path

import click
import pandas as pd
from dotenv import load_dotenv

from noncanonical_hmc.config import get_output_root, setup_root_logger
from noncanonical_hmc.config_models import ExperimentSpec, Method, Task
from noncanonical_hmc.experiments.output import SUMMARY_NAME
from noncanonical_hmc.experiments.pydantic_models import ExperimentSummary
from noncanonical_hmc.experiments.runner import cmd_sample

load_dotenv()

logger = logging.getLogger(__name__)

DATASET_FOLDER = Path(__file__).parents[1] / "data" / "examples"
FN_METHODS = [
    Method.CAN_IMP,
    Method.MAG_MOM_IMP,
    Method.MAG_MOM_EXP,
    Method.CMAG_IMP,
    Method.CMAG_EXP,
]
FN_STEP_COUNTS = (5, 10, 100)


def run_logistic_benchmarks(
    output_root: Path, n_samples: int | None, workers: int
) -> list[dict]:
    """Run every method on every bundled logistic dataset with ten chains.

    Parameters
    ----------
    output_root : Path
        Run directories are written to ``output_root/<dataset>/``.
    n_samples : int | None
        Samples per chain, None for the protocol default.
    workers : int
        Worker processes per experiment.

    Returns
    -------
    list[dict]
        One row per (dataset, method) with the summary values, or the error.
    """
    rows = []
    datasets = sorted(DATASET_FOLDER.glob("*.csv"))
    if not datasets:
        logger.warning(f"No datasets found in {DATASET_FOLDER}")
    for dataset in datasets:
        for method in Method:
            spec = ExperimentSpec(
                task=Task.LOGISTIC,
                method=method,
                dataset=dataset,
                n_samples=n_samples,
                workers=workers,
                output_dir=output_root / dataset.stem,
            )
            rows.append(_run_and_collect(spec, label=dataset.stem))
    return rows


def run_fn_benchmarks(
    output_root: Path,
    n_samples: int | None,
    workers: int,
    step_counts: Sequence[int] = FN_STEP_COUNTS,
) -> list[dict]:
    """Run the Fitzhugh-Nagumo protocol for the implicit and explicit
    non-canonical methods and the canonical baseline, once per trajectory step
    count. Run names do not carry the step count, so each count gets its own
    ``output_root/fitzhugh-nagumo/n<steps>/`` folder."""
    rows = []
    for n_steps in step_counts:
        for method in FN_METHODS:
            spec = ExperimentSpec(
                task=Task.FITZHUGH_NAGUMO,
                method=method,
                n_samples=n_samples,
                n_steps=n_steps,
                workers=workers,
                output_dir=output_root / "fitzhugh-nagumo" / f"n{n_steps}",
            )
            row = _run_and_collect(spec, label="fitzhugh-nagumo")
            row["n_steps"] = n_steps
            rows.append(row)
    return rows


def _run_and_collect(spec: ExperimentSpec, label: str) -> dict:
    row = {"benchmark": label, "method": spec.method.value}
    try:
        run_dir = cmd_sample(spec)
    except Exception as e:
        logger.error(f"{label} / {spec.method.value} failed: {e}")
        row["error"] = str(e)
        return row
    summary = ExperimentSummary.model_validate_json(
        (run_dir / SUMMARY_NAME).read_text()
    )
    row.update(summary.model_dump(exclude={"method"}))
    row["run_dir"] = str(run_dir)
    return row


@click.command()
@click.option(
    "--output-root",
    type=click.Path(file_okay=False, path_type=Path),
    default=None,
    help="Defaults to NCHMC_OUTPUT_ROOT or ./runs.",
)
@click.option(
    "--n-samples",
    type=click.IntRange(min=1),
    default=None,
    help="Override the protocol's samples per chain for a quicker pass.",
)
@click.option("--workers", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--skip-fn", is_flag=True, default=False)
@click.option(
    "--n-steps",
    "fn_step_counts",
    type=click.IntRange(min=1),
    multiple=True,
    default=FN_STEP_COUNTS,
    show_default=True,
    help="Fitzhugh-Nagumo trajectory lengths; repeat the option for several.",
)
def main(
    output_root: Path | None,
    n_samples: int | None,
    workers: int,
    skip_fn: bool,
    fn_step_counts: tuple[int, ...],
) -> None:
    """Reproduce the logistic regression and Fitzhugh-Nagumo benchmark tables."""
    output_root = output_root or get_output_root() / "benchmarks"
    rows = run_logistic_benchmarks(output_root, n_samples, workers)
    if not skip_fn:
        rows += run_fn_benchmarks(output_root, n_samples, workers, fn_step_counts)

    table = pd.DataFrame(rows)
    output_root.mkdir(parents=True, exist_ok=True)
    table.to_csv(output_root / "benchmarks.csv", index=False, float_format="%.17g")
    logger.info(f"Benchmark table written to {output_root / 'benchmarks.csv'}")
    failed = table["error"].notna().sum() if "error" in table else 0
    if failed:
        logger.warning(f"{failed} benchmark run(s) failed")


if __name__ == "__main__":
    setup_root_logger()
    main()
