from pathlib import Path

import numpy as np
import pandas as pd
import pytest
from reference_targets import finite_difference_gradient

from noncanonical_hmc.models.base import (
    GradientCounter,
    ModelEvaluationError,
    PhasePoint,
    grad_hamiltonian,
    hamiltonian,
)
from noncanonical_hmc.models.fitzhugh_nagumo import (
    LIKELIHOOD_VARIANCE,
    TRUE_PARAMS,
    fitzhugh_nagumo_model,
    load_fn_data,
    save_fn_data,
    simulate_fn_data,
)
from noncanonical_hmc.models.gaussian import (
    MIXTURE_CENTERS,
    QuadraticGaussianModel,
    gaussian_mixture,
    mixture_benchmark,
    standard_gaussian,
)
from noncanonical_hmc.models.logistic import (
    LogisticRegressionModel,
    fisher_sqrt_at_mode,
    load_dataset,
    logistic_regression,
    make_synthetic_logistic,
    standardize,
)

EXAMPLES_FOLDER = Path(__file__).parents[1] / "data" / "examples"


def test_phase_point():
    z = PhasePoint(q=[1.0, 2.0], p=[3.0, 4.0])
    assert z.n == 2
    np.testing.assert_array_equal(z.vector, [1.0, 2.0, 3.0, 4.0])
    np.testing.assert_array_equal(z.flip_momentum().p, [-3.0, -4.0])
    np.testing.assert_array_equal(PhasePoint.from_vector(z.vector).q, z.q)

    with pytest.raises(ValueError):
        PhasePoint(q=[1.0], p=[1.0, 2.0])
    with pytest.raises(ValueError):
        PhasePoint(q=[np.nan], p=[0.0])


def test_hamiltonian():
    model = standard_gaussian(2)
    z = PhasePoint(q=[1.0, 0.0], p=[0.0, 2.0])
    assert hamiltonian(model, z) == pytest.approx(0.5 + 2.0)
    np.testing.assert_array_equal(grad_hamiltonian(model, z), z.vector)

    with pytest.raises(ValueError):
        hamiltonian(standard_gaussian(3), z)


def test_non_finite_potential():
    model = QuadraticGaussianModel(np.eye(1))
    z = PhasePoint(q=[1e200], p=[0.0])
    with pytest.raises(ModelEvaluationError) as excinfo:
        hamiltonian(model, z)
    assert excinfo.value.type == "ModelEvaluation"
    np.testing.assert_array_equal(excinfo.value.q, [1e200])


def test_gradient_counter():
    counter = GradientCounter(standard_gaussian(2))
    q = np.array([0.5, -0.5])
    counter.potential(q)
    counter.grad_potential(q)
    counter.grad_potential(q)
    assert counter.potential_calls == 1
    assert counter.gradient_calls == 2
    assert counter.n == 2

    counter.reset()
    assert counter.gradient_calls == 0


def test_mixture_potential():
    model = mixture_benchmark()
    assert model.n == 2
    center = np.array(MIXTURE_CENTERS[0])
    # the other component contributes exp(-25)
    expected = np.log(2.0) + np.log(2.0 * np.pi) - np.log1p(np.exp(-25.0))
    assert model.potential(center) == pytest.approx(expected, abs=1e-12)
    np.testing.assert_allclose(model.grad_potential(np.zeros(2)), [0.0, 0.0], atol=1e-15)

    with pytest.raises(ValueError):
        gaussian_mixture([[0.0, 0.0]], variance=0.0)


@pytest.mark.parametrize(
    "model",
    [
        mixture_benchmark(),
        gaussian_mixture([[1.0, 0.0, 0.5], [-1.0, 2.0, 0.0]], variance=0.7),
        QuadraticGaussianModel(np.array([[2.0, 0.3], [0.3, 1.0]])),
    ],
)
def test_gaussian_gradients(model):
    rng = np.random.default_rng(0)
    for _ in range(5):
        q = 2.0 * rng.standard_normal(model.n)
        np.testing.assert_allclose(
            model.grad_potential(q),
            finite_difference_gradient(model.potential, q),
            rtol=1e-6,
            atol=1e-7,
        )


def test_standard_gaussian():
    model = standard_gaussian(3)
    assert model.potential(np.zeros(3)) == 0.0
    assert model.potential(np.ones(3)) == pytest.approx(1.5)

    with pytest.raises(ValueError):
        standard_gaussian(0)
    with pytest.raises(ValueError):
        QuadraticGaussianModel(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_logistic_gradient_and_mode():
    df = make_synthetic_logistic(seed=3, m=150, n=4)
    assert list(df.columns) == ["x_1", "x_2", "x_3", "x_4", "y"]
    assert set(df["y"].unique()) <= {0, 1}

    model = logistic_regression(df.iloc[:, :-1].to_numpy(), df["y"].to_numpy())
    assert model.n == 4
    assert model.n_train == 150

    rng = np.random.default_rng(1)
    for _ in range(3):
        q = rng.standard_normal(4)
        np.testing.assert_allclose(
            model.grad_potential(q),
            finite_difference_gradient(model.potential, q),
            rtol=1e-6,
            atol=1e-6,
        )

    mode = model.find_mode()
    assert np.linalg.norm(model.grad_potential(mode)) < 1e-8
    np.testing.assert_array_equal(model.find_mode(), mode)

    root = fisher_sqrt_at_mode(model)
    np.testing.assert_allclose(root @ root, model.hessian(mode), atol=1e-9)


def test_logistic_prior_only():
    model = LogisticRegressionModel.prior_only(3)
    q = np.array([1.0, -2.0, 0.5])
    assert model.n_train == 0
    assert model.potential(q) == pytest.approx(0.5 * q @ q)
    np.testing.assert_allclose(model.grad_potential(q), q)
    np.testing.assert_allclose(model.find_mode(), np.zeros(3))


def test_logistic_input_errors():
    with pytest.raises(ValueError):
        logistic_regression(np.zeros((3, 2)), np.array([0.0, 1.0, 2.0]))
    with pytest.raises(ValueError):
        logistic_regression(np.zeros((3, 2)), np.array([0.0, 1.0]))
    with pytest.raises(ValueError):
        logistic_regression(np.zeros((0, 2)), np.zeros(0))
    with pytest.raises(TypeError):
        fisher_sqrt_at_mode(standard_gaussian(2))


def test_standardize():
    features = np.array([[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]])
    scaled = standardize(features)
    np.testing.assert_allclose(scaled.mean(axis=0), [0.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(scaled[:, 0].std(), 1.0)
    np.testing.assert_array_equal(scaled[:, 1], [0.0, 0.0, 0.0])


def test_load_dataset(tmp_path):
    features, labels = load_dataset(EXAMPLES_FOLDER / "synthetic_500x8.csv")
    assert features.shape == (500, 8)
    assert labels.shape == (500,)
    np.testing.assert_allclose(features.mean(axis=0), np.zeros(8), atol=1e-12)

    features, labels = load_dataset(EXAMPLES_FOLDER / "titanic_like.csv")
    assert features.shape == (400, 6)
    assert set(np.unique(labels)) <= {0.0, 1.0}

    path = tmp_path / "missing.csv"
    pd.DataFrame({"x": [1.0, None], "y": [0, 1]}).to_csv(path, index=False)
    with pytest.raises(ValueError):
        load_dataset(path)


def test_fn_simulation():
    data = simulate_fn_data(seed=0, count=200)
    assert data.count == 200
    assert data.times[0] == 0.0
    assert data.times[-1] < 10.0
    assert data.true_params == TRUE_PARAMS

    again = simulate_fn_data(seed=0, count=200)
    np.testing.assert_array_equal(again.obs_v, data.obs_v)

    noiseless = simulate_fn_data(seed=0, count=200, noiseless=True)
    model = fitzhugh_nagumo_model(noiseless)
    theta = np.array(TRUE_PARAMS)
    solution = model.solve(theta)
    np.testing.assert_array_equal(solution[:, 0], noiseless.obs_v)
    np.testing.assert_array_equal(solution[:, 1], noiseless.obs_r)
    np.testing.assert_array_equal(solution[0], [-1.0, 1.0])
    # zero residuals leave only the prior term and the constants
    assert model.potential(theta) == pytest.approx(theta @ theta + model.log_normalizer)

    residual_std = np.std(data.obs_v - noiseless.obs_v)
    assert 0.07 < residual_std < 0.13


def test_fn_gradient():
    data = simulate_fn_data(seed=1, count=20)
    model = fitzhugh_nagumo_model(data)
    for theta in (np.array(TRUE_PARAMS), np.array([0.3, 0.1, 2.5])):
        np.testing.assert_allclose(
            model.grad_potential(theta),
            finite_difference_gradient(model.potential, theta, h=1e-6),
            rtol=1e-5,
            atol=1e-5,
        )


def test_fn_likelihood_scale():
    data = simulate_fn_data(seed=2, count=10, noiseless=True)
    model = fitzhugh_nagumo_model(data)
    theta = np.array([0.25, 0.2, 3.0])
    residuals = model.solve(theta) - np.column_stack([data.obs_v, data.obs_r])
    expected = (
        theta @ theta
        + np.sum(residuals**2) / (2.0 * LIKELIHOOD_VARIANCE)
        + model.log_normalizer
    )
    assert model.potential(theta) == pytest.approx(expected, rel=1e-12)


def test_fn_blow_up():
    model = fitzhugh_nagumo_model(simulate_fn_data(seed=0, count=20))
    with pytest.raises(ModelEvaluationError):
        model.potential(np.array([0.2, 0.2, 0.0]))


def test_fn_data_files(tmp_path):
    data = simulate_fn_data(seed=4, count=50)
    path = tmp_path / "fn.csv"
    save_fn_data(data, path)
    assert (tmp_path / "fn.json").exists()
    assert list(pd.read_csv(path).columns) == ["time", "obsV", "obsR"]

    loaded = load_fn_data(path)
    np.testing.assert_array_equal(loaded.obs_r, data.obs_r)
    assert loaded.seed == 4
    assert loaded.initial_state == (-1.0, 1.0)

    pd.DataFrame({"time": [0.0], "obsV": [1.0]}).to_csv(path, index=False)
    with pytest.raises(ValueError):
        load_fn_data(path)
