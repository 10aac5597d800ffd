import json
import logging
import sys
from pathlib import Path
from typing import Callable

import click
from dotenv import load_dotenv
from pydantic import ValidationError

from noncanonical_hmc.config import setup_root_logger
from noncanonical_hmc.config_models import ExperimentSpec, Method, Task
from noncanonical_hmc.experiments.pydantic_models import ErrorMessage, RunManifest
from noncanonical_hmc.experiments.runner import (
    cmd_diagnose,
    cmd_fn_data,
    cmd_omega_sweep,
    cmd_sample,
    cmd_trajectory,
)

load_dotenv()

logger = logging.getLogger(__name__)

SAMPLING_TASKS = [Task.GAUSSIAN, Task.MIXTURE, Task.LOGISTIC, Task.FITZHUGH_NAGUMO]
COMMANDS: dict[Task, Callable[[ExperimentSpec], Path]] = {
    Task.OMEGA_SWEEP: cmd_omega_sweep,
    Task.TRAJECTORY: cmd_trajectory,
}


def _build_spec(**fields) -> ExperimentSpec:
    """Validate command-line values into an ExperimentSpec; invalid combinations
    are usage errors."""
    fields = {key: value for key, value in fields.items() if value is not None}
    try:
        return ExperimentSpec(**fields)
    except ValidationError as e:
        messages = "; ".join(error["msg"] for error in e.errors())
        raise click.UsageError(messages) from e


def _load_manifest_spec(path: Path, output_dir: Path | None) -> ExperimentSpec:
    try:
        manifest = RunManifest.model_validate_json(Path(path).read_text())
    except ValidationError as e:
        raise click.UsageError(f"{path} is not a run manifest: {e}") from e
    if output_dir is not None:
        return manifest.spec.model_copy(update={"output_dir": output_dir})
    return manifest.spec


def _run(command: Callable, *args):
    """Run a back-end command; runtime failures exit with status 1 and a JSON
    error line on stderr."""
    try:
        return command(*args)
    except click.ClickException:
        raise
    except Exception as e:
        logger.error(f"{type(e).__name__}: {e}")
        error = ErrorMessage(error=getattr(e, "type", type(e).__name__), message=str(e))
        click.echo(error.model_dump_json(), err=True)
        sys.exit(1)


@click.group()
@click.option(
    "--log-level",
    default="INFO",
    show_default=True,
    type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False),
)
def cli(log_level: str) -> None:
    """Non-canonical Hamiltonian Monte Carlo experiments."""
    setup_root_logger(log_level.upper())


@cli.command()
@click.option(
    "--task",
    type=click.Choice([task.value for task in SAMPLING_TASKS]),
    help="Target to sample; required unless --spec is given.",
)
@click.option("--method", type=click.Choice([method.value for method in Method]))
@click.option(
    "--dataset",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="CSV with feature columns and a final 0/1 label column.",
)
@click.option(
    "--fn-data",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="Observations written by the fn-data command.",
)
@click.option("--step-size", type=float)
@click.option("--n-steps", type=int)
@click.option("--n-samples", type=int)
@click.option("--n-chains", type=int)
@click.option("-k", "k", type=int, help="Scale of the random structure blocks.")
@click.option("--omega", type=float, help="Binding strength of the explicit integrator.")
@click.option("--dim", type=int)
@click.option("--observations", type=int)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--chain-seed", type=int, default=0, show_default=True)
@click.option("--flip-on-reject", is_flag=True, default=False)
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--output-dir", type=click.Path(file_okay=False, path_type=Path))
@click.option(
    "--spec",
    "spec_path",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="Replay the manifest.json of an earlier run.",
)
def sample(
    task: str | None,
    method: str | None,
    dataset: Path | None,
    fn_data: Path | None,
    step_size: float | None,
    n_steps: int | None,
    n_samples: int | None,
    n_chains: int | None,
    k: int | None,
    omega: float | None,
    dim: int | None,
    observations: int | None,
    seed: int,
    chain_seed: int,
    flip_on_reject: bool,
    workers: int,
    output_dir: Path | None,
    spec_path: Path | None,
) -> None:
    """Run a sampling experiment and write its run directory."""
    if spec_path is not None:
        spec = _load_manifest_spec(spec_path, output_dir)
        logger.info(f"Replaying {spec_path}")
        command = COMMANDS.get(spec.task, cmd_sample)
        click.echo(str(_run(command, spec)))
        return
    if task is None:
        raise click.UsageError("Either --task or --spec is required")
    spec = _build_spec(
        task=task,
        method=method,
        dataset=dataset,
        fn_data=fn_data,
        step_size=step_size,
        n_steps=n_steps,
        n_samples=n_samples,
        n_chains=n_chains,
        k=k,
        omega=omega,
        dim=dim,
        observations=observations,
        seed=seed,
        chain_seed=chain_seed,
        flip_on_reject=flip_on_reject,
        workers=workers,
        output_dir=output_dir,
    )
    click.echo(str(_run(cmd_sample, spec)))


@cli.command("omega-sweep")
@click.option("--step-size", type=float)
@click.option("--n-steps", type=int)
@click.option("--n-samples", type=int)
@click.option("-k", "k", type=int)
@click.option(
    "--omega",
    "omegas",
    type=float,
    multiple=True,
    help="Binding strength to include; repeat for a grid.",
)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--chain-seed", type=int, default=0, show_default=True)
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--output-dir", type=click.Path(file_okay=False, path_type=Path))
def omega_sweep(
    step_size: float | None,
    n_steps: int | None,
    n_samples: int | None,
    k: int | None,
    omegas: tuple[float, ...],
    seed: int,
    chain_seed: int,
    workers: int,
    output_dir: Path | None,
) -> None:
    """Compare explicit and implicit chains on the mixture over a grid of
    binding strengths."""
    spec = _build_spec(
        task=Task.OMEGA_SWEEP,
        step_size=step_size,
        n_steps=n_steps,
        n_samples=n_samples,
        k=k,
        omegas=list(omegas) or None,
        seed=seed,
        chain_seed=chain_seed,
        workers=workers,
        output_dir=output_dir,
    )
    click.echo(str(_run(cmd_omega_sweep, spec)))


@cli.command()
@click.option("--step-size", type=float)
@click.option("--n-steps", type=int)
@click.option("-k", "k", type=int)
@click.option("--dim", type=int)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--output-dir", type=click.Path(file_okay=False, path_type=Path))
def trajectory(
    step_size: float | None,
    n_steps: int | None,
    k: int | None,
    dim: int | None,
    seed: int,
    output_dir: Path | None,
) -> None:
    """Write position traces under canonical, magnetic and non-canonical
    structures."""
    spec = _build_spec(
        task=Task.TRAJECTORY,
        step_size=step_size,
        n_steps=n_steps,
        k=k,
        dim=dim,
        seed=seed,
        output_dir=output_dir,
    )
    click.echo(str(_run(cmd_trajectory, spec)))


@cli.command("fn-data")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--count", type=click.IntRange(min=1), default=200, show_default=True)
@click.option(
    "--output",
    type=click.Path(dir_okay=False, path_type=Path),
    required=True,
    help="CSV to write; a .json sidecar is written next to it.",
)
@click.option("--noiseless", is_flag=True, default=False)
def fn_data(seed: int, count: int, output: Path, noiseless: bool) -> None:
    """Simulate Fitzhugh-Nagumo observations."""
    click.echo(str(_run(cmd_fn_data, seed, count, output, noiseless)))


@cli.command()
@click.argument(
    "run_dir", type=click.Path(exists=True, file_okay=False, path_type=Path)
)
def diagnose(run_dir: Path) -> None:
    """Recompute diagnostics from the chains of a run directory."""
    summary = _run(cmd_diagnose, run_dir)
    click.echo(summary.to_frame().to_csv(index=False), nl=False)
    overview = {
        "ess_mean": summary.ess_mean,
        "ess_min": summary.ess_min,
        "rhat_max": summary.rhat_max,
        "accept_rate": summary.accept_rate,
    }
    logger.info(f"Diagnostics for {run_dir}: {json.dumps(overview)}")


if __name__ == "__main__":
    cli()
