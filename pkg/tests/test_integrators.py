import numpy as np
import pytest
from reference_targets import (
    IMPLICIT_VARIANTS,
    ConstantForceModel,
    gaussian_flow,
    numerical_jacobian,
    random_spd,
    variant_structure,
)

from noncanonical_hmc.config_models import IntegratorConfig, VariantTag
from noncanonical_hmc.integrators.base import (
    ExpandedPhasePoint,
    IntegrationError,
    ensure_finite,
    path_energies,
)
from noncanonical_hmc.integrators.explicit import (
    explicit_path,
    explicit_step,
    explicit_trajectory,
    phi3,
)
from noncanonical_hmc.integrators.implicit_midpoint import (
    implicit_midpoint_path,
    implicit_midpoint_step,
    implicit_midpoint_trajectory,
    reversal_roundtrip,
)
from noncanonical_hmc.integrators.leapfrog import (
    leapfrog_path,
    leapfrog_step,
    leapfrog_trajectory,
)
from noncanonical_hmc.models.base import GradientCounter, PhasePoint, hamiltonian
from noncanonical_hmc.models.gaussian import (
    MIXTURE_CENTERS,
    QuadraticGaussianModel,
    mixture_benchmark,
    standard_gaussian,
)
from noncanonical_hmc.symplectic.darboux import darboux_basis_for
from noncanonical_hmc.symplectic.structure import random_poisson_structure


def _start(n: int, seed: int, center=None) -> PhasePoint:
    rng = np.random.default_rng(seed)
    q = rng.standard_normal(n) * 0.3
    if center is not None:
        q = q + np.asarray(center)
    return PhasePoint(q=q, p=rng.standard_normal(n))


def test_leapfrog_gradient_count():
    counter = GradientCounter(standard_gaussian(2))
    cfg = IntegratorConfig(step_size=0.1, n_steps=10)
    leapfrog_trajectory(counter, _start(2, 0), cfg)
    assert counter.gradient_calls == 20


def test_explicit_gradient_count():
    counter = GradientCounter(standard_gaussian(2))
    structure = variant_structure(VariantTag.MAGNETIC_POSITION, 2, seed=0)
    basis = darboux_basis_for(structure, seed=0)
    cfg = IntegratorConfig(step_size=0.1, n_steps=10, omega=5.0)
    explicit_trajectory(counter, basis, _start(2, 0), cfg)
    assert counter.gradient_calls == 40


def test_leapfrog_energy_and_reversibility():
    model = standard_gaussian(2)
    z = PhasePoint(q=[1.0, 0.0], p=[0.0, 0.5])
    cfg = IntegratorConfig(step_size=0.1, n_steps=100)
    path = leapfrog_path(model, z, cfg)
    assert path.shape == (101, 4)
    energies = path_energies(model, path)
    assert np.max(np.abs(energies - energies[0])) < 1e-2

    end = leapfrog_trajectory(model, z, cfg).point
    np.testing.assert_allclose(end.vector, path[-1], atol=1e-14)
    back = leapfrog_trajectory(model, end.flip_momentum(), cfg).point
    np.testing.assert_allclose(back.flip_momentum().vector, z.vector, atol=1e-9)


def test_preconditioned_leapfrog():
    model = standard_gaussian(2)
    z = _start(2, 1)
    scaled = leapfrog_step(model, z, 0.05, A=2.0 * np.eye(2))
    plain = leapfrog_step(model, z, 0.1)
    np.testing.assert_allclose(scaled.vector, plain.vector, atol=1e-14)


def test_phi3():
    w = ExpandedPhasePoint(
        qt=np.array([1.0, 0.0]),
        pt=np.array([0.0, 1.0]),
        xt=np.array([0.5, 0.5]),
        yt=np.array([-1.0, 0.0]),
    )
    rotated = phi3(w, epsilon=0.3, omega=2.0)
    np.testing.assert_allclose(rotated.qt + rotated.xt, w.qt + w.xt, atol=1e-15)
    np.testing.assert_allclose(rotated.pt + rotated.yt, w.pt + w.yt, atol=1e-15)
    # rotation keeps the size of the copy difference
    before = np.sum((w.qt - w.xt) ** 2 + (w.pt - w.yt) ** 2)
    after = np.sum((rotated.qt - rotated.xt) ** 2 + (rotated.pt - rotated.yt) ** 2)
    assert after == pytest.approx(before, rel=1e-12)

    full_turn = phi3(w, epsilon=np.pi, omega=1.0)
    np.testing.assert_allclose(full_turn.qt, w.qt, atol=1e-12)
    np.testing.assert_allclose(full_turn.yt, w.yt, atol=1e-12)


def test_expanded_phase_point():
    w = ExpandedPhasePoint.doubled(np.array([1.0, 2.0, 3.0, 4.0]))
    assert w.defect == 0.0
    assert w.is_finite()
    np.testing.assert_array_equal(w.yt, [3.0, 4.0])

    with pytest.raises(ValueError):
        ExpandedPhasePoint(
            qt=np.zeros(2), pt=np.zeros(2), xt=np.zeros(3), yt=np.zeros(2)
        )


def test_ensure_finite():
    with pytest.raises(IntegrationError) as excinfo:
        ensure_finite(np.array([0.0, np.inf]), "leapfrog", 3)
    assert excinfo.value.step == 3
    assert excinfo.value.type == "IntegrationError"


@pytest.mark.parametrize("tag", IMPLICIT_VARIANTS)
def test_implicit_midpoint_conserves_quadratic_energy(tag):
    model = standard_gaussian(2)
    structure = variant_structure(tag, 2, seed=3, k=2)
    cfg = IntegratorConfig(step_size=0.05, n_steps=100, fp_tol=1e-12)
    path = implicit_midpoint_path(model, structure, _start(2, 3), cfg)
    energies = path_energies(model, path)
    assert np.max(np.abs(energies - energies[0])) < 1e-9


@pytest.mark.parametrize("tag", IMPLICIT_VARIANTS)
def test_implicit_midpoint_reversibility(tag):
    cfg = IntegratorConfig(step_size=0.05, n_steps=50, fp_tol=1e-10, fp_max_iters=200)
    gaussian = standard_gaussian(2)
    mixture = mixture_benchmark()
    for seed in range(5):
        structure = variant_structure(tag, 2, seed, k=2)
        z = _start(2, seed)
        assert reversal_roundtrip(gaussian, structure, z, cfg) < 1e-5
        z = _start(2, seed, center=MIXTURE_CENTERS[0])
        assert reversal_roundtrip(mixture, structure, z, cfg) < 1e-5


@pytest.mark.slow
@pytest.mark.parametrize("tag", IMPLICIT_VARIANTS)
def test_implicit_midpoint_reversibility_many_seeds(tag):
    cfg = IntegratorConfig(step_size=0.05, n_steps=50, fp_tol=1e-10, fp_max_iters=200)
    gaussian = standard_gaussian(2)
    mixture = mixture_benchmark()
    for seed in range(20):
        structure = variant_structure(tag, 2, seed, k=2)
        assert reversal_roundtrip(gaussian, structure, _start(2, seed), cfg) < 1e-5
        z = _start(2, seed, center=MIXTURE_CENTERS[1])
        assert reversal_roundtrip(mixture, structure, z, cfg) < 1e-5


def _step_map(model, structure, cfg):
    def one_step(z):
        point = PhasePoint.from_vector(z)
        return implicit_midpoint_step(model, structure, point, cfg).point.vector

    return one_step


@pytest.mark.parametrize("tag", IMPLICIT_VARIANTS)
def test_implicit_midpoint_preserves_volume(tag):
    cfg = IntegratorConfig(step_size=0.1, n_steps=1, fp_tol=1e-13, fp_max_iters=500)
    targets = [
        (mixture_benchmark(), MIXTURE_CENTERS[0]),
        (QuadraticGaussianModel(random_spd(1, seed=0) / 2.0), None),
        (QuadraticGaussianModel(random_spd(3, seed=1) / 3.0), None),
    ]
    for model, center in targets:
        structure = variant_structure(tag, model.n, seed=4, k=2)
        z0 = _start(model.n, 5, center=center).vector
        jacobian = numerical_jacobian(_step_map(model, structure, cfg), z0)
        assert abs(np.linalg.det(jacobian) - 1.0) < 1e-5


def test_implicit_midpoint_order():
    model = standard_gaussian(2)
    structure = variant_structure(VariantTag.MAGNETIC_POSITION, 2, seed=0)
    z = _start(2, 0)
    exact = gaussian_flow(structure.B, z.vector, 1.0)
    errors = []
    for step_size, n_steps in ((0.05, 20), (0.025, 40)):
        cfg = IntegratorConfig(step_size=step_size, n_steps=n_steps, fp_tol=1e-13)
        end = implicit_midpoint_trajectory(model, structure, z, cfg).point
        errors.append(np.max(np.abs(end.vector - exact)))
    assert 3.2 <= errors[0] / errors[1] <= 4.8


def test_explicit_order():
    model = standard_gaussian(2)
    structure = variant_structure(VariantTag.MAGNETIC_POSITION, 2, seed=0)
    basis = darboux_basis_for(structure, seed=0)
    z = _start(2, 0)
    reference = explicit_trajectory(
        model, basis, z, IntegratorConfig(step_size=0.05 / 64, n_steps=1280)
    ).point.vector
    errors = []
    for step_size, n_steps in ((0.05, 20), (0.025, 40)):
        cfg = IntegratorConfig(step_size=step_size, n_steps=n_steps)
        end = explicit_trajectory(model, basis, z, cfg).point
        errors.append(np.max(np.abs(end.vector - reference)))
    assert 3.2 <= errors[0] / errors[1] <= 4.8


def test_explicit_path_matches_trajectory():
    model = mixture_benchmark()
    structure = variant_structure(VariantTag.COUPLED_MAGNET, 2, seed=1)
    basis = darboux_basis_for(structure, seed=1)
    z = _start(2, 2, center=MIXTURE_CENTERS[0])
    cfg = IntegratorConfig(step_size=0.02, n_steps=25, omega=10.0)
    original, canonical = explicit_path(model, basis, z, cfg)
    assert original.shape == canonical.shape == (26, 4)
    np.testing.assert_allclose(original[0], z.vector, atol=1e-12)

    result = explicit_trajectory(model, basis, z, cfg)
    np.testing.assert_allclose(result.point.vector, original[-1], atol=1e-12)
    assert result.defect > 0.0
    assert result.converged


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_explicit_matches_implicit_on_mixture(seed):
    model = mixture_benchmark()
    structure = random_poisson_structure(2, seed=seed, k=2)
    basis = darboux_basis_for(structure, seed=seed)
    z = _start(2, seed, center=MIXTURE_CENTERS[seed % 2])
    explicit = explicit_trajectory(
        model, basis, z, IntegratorConfig(step_size=1e-2, n_steps=100, omega=1.0)
    )
    implicit = implicit_midpoint_trajectory(
        model, structure, z, IntegratorConfig(step_size=1e-2, n_steps=100, fp_tol=1e-12)
    )
    assert implicit.converged
    assert np.max(np.abs(explicit.point.vector - implicit.point.vector)) < 1e-3


def test_explicit_step_non_finite():
    model = ConstantForceModel(n=1)
    structure = variant_structure(VariantTag.CANONICAL, 1, seed=0)
    basis = darboux_basis_for(structure, seed=0)
    w = ExpandedPhasePoint.doubled(np.array([1.0, 0.0]))
    with pytest.raises(IntegrationError):
        explicit_step(model, basis, w, IntegratorConfig(step_size=1e308, n_steps=1))


def test_implicit_midpoint_unconverged():
    model = standard_gaussian(2)
    structure = variant_structure(VariantTag.COUPLED_MAGNET, 2, seed=0)
    cfg = IntegratorConfig(step_size=0.1, n_steps=3, fp_tol=1e-15, fp_max_iters=1)
    step = implicit_midpoint_step(model, structure, _start(2, 0), cfg)
    assert not step.converged
    assert step.iterations == 1
    assert not implicit_midpoint_trajectory(model, structure, _start(2, 0), cfg).converged

    with pytest.raises(ValueError):
        implicit_midpoint_step(standard_gaussian(3), structure, _start(2, 0), cfg)


def test_negative_step_retraces_implicit():
    model = mixture_benchmark()
    structure = variant_structure(VariantTag.MAGNETIC_MOMENTUM, 2, seed=6, k=2)
    z = _start(2, 6, center=MIXTURE_CENTERS[1])
    forward = IntegratorConfig(step_size=0.05, n_steps=20, fp_tol=1e-12)
    backward = IntegratorConfig(step_size=-0.05, n_steps=20, fp_tol=1e-12)
    end = implicit_midpoint_trajectory(model, structure, z, forward).point
    start = implicit_midpoint_trajectory(model, structure, end, backward).point
    np.testing.assert_allclose(start.vector, z.vector, atol=1e-8)
    assert hamiltonian(model, end) == pytest.approx(hamiltonian(model, z), abs=1e-3)
