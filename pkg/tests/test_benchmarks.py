import importlib.util
from pathlib import Path

import numpy as np
import pandas as pd
import pytest
from click.testing import CliRunner

from noncanonical_hmc.config import load_protocol_config
from noncanonical_hmc.config_models import ExperimentSpec, Method, Task
from noncanonical_hmc.experiments.protocols import (
    build_task,
    resolve_spec,
    sampler_config,
)
from noncanonical_hmc.sampler.experiment import ExperimentResult, run_experiment

EXAMPLES_FOLDER = Path(__file__).parents[1] / "data" / "examples"

# posterior mean bands (centre, half width) for the parameters a, b, c
FN_POSTERIOR_BANDS = [(0.18, 0.04), (0.28, 0.20), (2.96, 0.12)]


def _run(spec: ExperimentSpec, workers: int = 1) -> ExperimentResult:
    protocol = load_protocol_config()
    setup = build_task(spec)
    resolved = resolve_spec(spec, protocol, n_train=setup.derived.get("n_train"))
    cfg = sampler_config(resolved, setup, protocol)
    return run_experiment(
        setup.model,
        cfg,
        n_chains=resolved.n_chains,
        compute_rhat=resolved.n_chains >= 2,
        workers=workers,
    )


@pytest.mark.parametrize("dataset", ["synthetic_200x4.csv", "titanic_like.csv"])
@pytest.mark.parametrize("method", list(Method))
def test_logistic_ess_bounded_by_samples(dataset, method):
    n_samples = 30
    spec = ExperimentSpec(
        task=Task.LOGISTIC,
        method=method,
        dataset=EXAMPLES_FOLDER / dataset,
        n_samples=n_samples,
        n_chains=2,
        n_steps=10,
    )
    summary = _run(spec).summary
    assert summary.n_samples == 2 * n_samples
    assert np.all(np.isfinite(summary.ess))
    assert np.all(summary.ess > 0.0)
    assert np.all(summary.ess <= n_samples)


@pytest.mark.slow
@pytest.mark.parametrize("method", list(Method))
def test_logistic_ten_chains_converge(method):
    spec = ExperimentSpec(
        task=Task.LOGISTIC,
        method=method,
        dataset=EXAMPLES_FOLDER / "synthetic_200x4.csv",
    )
    result = _run(spec, workers=4)
    assert len(result.chains) == 10
    assert result.chains[0].samples.shape[0] == 1000
    assert result.summary.rhat_max < 1.05


@pytest.mark.slow
@pytest.mark.parametrize(
    "method",
    [Method.CAN_IMP, Method.MAG_MOM_IMP, Method.MAG_MOM_EXP, Method.CMAG_IMP],
)
def test_fitzhugh_nagumo_posterior_means(method):
    spec = ExperimentSpec(
        task=Task.FITZHUGH_NAGUMO, method=method, n_samples=300, n_chains=1
    )
    mean = _run(spec).summary.posterior_mean
    for value, (centre, half_width) in zip(mean, FN_POSTERIOR_BANDS):
        assert abs(value - centre) <= half_width


def _load_benchmark_driver():
    path = Path(__file__).parents[1] / "run" / "reproduce_benchmarks.py"
    module_spec = importlib.util.spec_from_file_location("reproduce_benchmarks", path)
    module = importlib.util.module_from_spec(module_spec)
    module_spec.loader.exec_module(module)
    return module


def test_benchmark_driver_sweeps_fn_step_counts(monkeypatch, tmp_path):
    driver = _load_benchmark_driver()
    requested = []

    def record(spec):
        requested.append(spec)
        raise RuntimeError("not run")

    monkeypatch.setattr(driver, "cmd_sample", record)
    result = CliRunner().invoke(driver.main, ["--output-root", str(tmp_path)])
    assert result.exit_code == 0, result.output

    fn_specs = [spec for spec in requested if spec.task == Task.FITZHUGH_NAGUMO]
    assert len(fn_specs) == len(driver.FN_STEP_COUNTS) * len(driver.FN_METHODS)
    assert sorted({spec.n_steps for spec in fn_specs}) == [5, 10, 100]
    for spec in fn_specs:
        assert spec.output_dir == tmp_path / "fitzhugh-nagumo" / f"n{spec.n_steps}"

    table = pd.read_csv(tmp_path / "benchmarks.csv")
    fn_rows = table[table["benchmark"] == "fitzhugh-nagumo"]
    assert sorted(fn_rows["n_steps"].unique()) == [5, 10, 100]
    assert table["error"].notna().all()

    requested.clear()
    result = CliRunner().invoke(
        driver.main, ["--output-root", str(tmp_path), "--n-steps", "20"]
    )
    assert result.exit_code == 0, result.output
    fn_specs = [spec for spec in requested if spec.task == Task.FITZHUGH_NAGUMO]
    assert {spec.n_steps for spec in fn_specs} == {20}
