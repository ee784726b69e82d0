import numpy as np
import pytest
import scipy.linalg

from conftest import (
    local_symplectic,
    random_physical_cm,
    rotation,
    baseline_params,
    toy_params,
    two_mode_squeezed_cm,
)
from services.linalg import (
    AsymmetricInput,
    NonFiniteState,
    NonPairedSpectrum,
    StepTooLarge,
    UnstableDrift,
    default_step,
    evolve_cm,
    lyapunov_residual,
    propagate_cm_exact,
    solve_lyapunov_steady,
    stability_margin,
    symplectic_eigenvalues,
    symplectic_form,
    vacuum_cm,
)
from services.model import build_diffusion, build_drift, derive_params


def system_matrices(params):
    derived = derive_params(params)
    return build_drift(params, derived), build_diffusion(params, derived)


@pytest.fixture
def toy_system():
    F, D = system_matrices(toy_params())
    assert stability_margin(F) < 0
    return F, D


# ============================================
# Basics
# ============================================

def test_symplectic_form_is_antisymmetric_and_squares_to_minus_identity():
    omega = symplectic_form(3)
    assert np.array_equal(omega.T, -omega)
    assert np.array_equal(omega @ omega, -np.eye(6))


def test_stability_margin_of_damped_identity():
    assert stability_margin(-2.5 * np.eye(6)) == pytest.approx(-2.5)


def test_stability_margin_decoupled_matches_feedback_decay():
    p = baseline_params(g_mc=0.0, G_md=0.0, tau=0.6)
    F, _ = system_matrices(p)
    kappa_fb = p.kappa_c * (1 - 2 * 0.6)
    assert stability_margin(F) == pytest.approx(-kappa_fb, rel=1e-9)


def test_stability_margin_rejects_nan():
    F = -np.eye(6)
    F[2, 3] = np.nan
    with pytest.raises(NonFiniteState):
        stability_margin(F)


# ============================================
# Lyapunov steady state
# ============================================

def test_lyapunov_isotropic_damping():
    kappa, n = 3.0, 4.0
    gamma = solve_lyapunov_steady(-kappa * np.eye(6), kappa * (2 * n + 1) * np.eye(6))
    assert np.allclose(gamma, (2 * n + 1) / 2 * np.eye(6), rtol=1e-12, atol=0)


def test_lyapunov_at_baseline_point():
    F, D = system_matrices(baseline_params())
    gamma = solve_lyapunov_steady(F, D)
    assert np.array_equal(gamma, gamma.T)
    assert lyapunov_residual(F, gamma, D) <= 1e-10
    assert symplectic_eigenvalues(gamma)[0] >= 0.5 - 1e-9


def test_lyapunov_agrees_with_scipy():
    F, D = system_matrices(baseline_params())
    ours = solve_lyapunov_steady(F, D)
    reference = scipy.linalg.solve_continuous_lyapunov(F, -D)
    assert np.linalg.norm(ours - reference) <= 1e-8 * np.linalg.norm(reference)


def test_lyapunov_rejects_unstable_drift():
    F, D = system_matrices(baseline_params(tau=0.9))
    with pytest.raises(UnstableDrift):
        solve_lyapunov_steady(F, D)


# ============================================
# Time evolution
# ============================================

def test_frozen_dynamics_keeps_initial_state():
    gamma0 = 0.5 * np.eye(6)
    states = evolve_cm(np.zeros((6, 6)), np.zeros((6, 6)), gamma0, [0.0, 1.0, 2.0])
    for state in states:
        assert np.array_equal(state, gamma0)


def test_evolution_matches_exact_propagator(toy_system):
    F, D = toy_system
    t_grid = np.linspace(0.0, 20.0, 5)
    states = evolve_cm(F, D, vacuum_cm(), t_grid)
    for t, state in zip(t_grid, states):
        exact = propagate_cm_exact(F, D, vacuum_cm(), t)
        assert np.linalg.norm(state - exact) <= 1e-6 * np.linalg.norm(exact)


def test_evolution_converges_to_steady_state(toy_system):
    F, D = toy_system
    t_end = 20.0 / abs(stability_margin(F))
    final = evolve_cm(F, D, vacuum_cm(), [0.0, t_end])[-1]
    steady = solve_lyapunov_steady(F, D)
    assert np.linalg.norm(final - steady) <= 1e-6 * np.linalg.norm(steady)


def test_rk4_error_shrinks_at_fourth_order(toy_system):
    F, D = toy_system
    t = 5.0
    exact = propagate_cm_exact(F, D, vacuum_cm(), t)
    h = 0.1
    coarse = evolve_cm(F, D, vacuum_cm(), [0.0, t], step=h)[-1]
    fine = evolve_cm(F, D, vacuum_cm(), [0.0, t], step=h / 2)[-1]
    ratio = np.linalg.norm(coarse - exact) / np.linalg.norm(fine - exact)
    assert 12 < ratio < 20


def test_forced_step_far_above_bound_raises(toy_system):
    F, D = toy_system
    step = 1.0 / np.max(np.abs(np.linalg.eigvals(F)))
    with pytest.raises(StepTooLarge):
        evolve_cm(F, D, vacuum_cm(), [0.0, 10.0], step=step)


def test_default_step_respects_bound(toy_system):
    F, _ = toy_system
    rate = np.max(np.abs(np.linalg.eigvals(F)))
    assert default_step(F) * rate == pytest.approx(0.05)
    assert default_step(F, freq_floor=100 * rate) * 100 * rate == pytest.approx(0.05)


def test_forced_step_limit_follows_default_step_with_floor(toy_system):
    F, D = toy_system
    rate = np.max(np.abs(np.linalg.eigvals(F)))
    floor = 3 * rate
    bound_step = default_step(F, freq_floor=floor)
    t_grid = [0.0, 20 * bound_step]
    evolve_cm(F, D, vacuum_cm(), t_grid, step=10 * bound_step, freq_floor=floor)
    with pytest.raises(StepTooLarge):
        evolve_cm(F, D, vacuum_cm(), t_grid, step=10.5 * bound_step, freq_floor=floor)


def test_blow_up_is_reported():
    with np.errstate(over='ignore', invalid='ignore'):
        with pytest.raises(NonFiniteState):
            evolve_cm(100.0 * np.eye(6), np.eye(6), vacuum_cm(), np.linspace(0.0, 10.0, 11))


def test_trajectory_stays_symmetric_and_physical():
    F, D = system_matrices(baseline_params())
    states = evolve_cm(F, D, vacuum_cm(), np.linspace(0.0, 2e-6, 21))
    for state in states:
        assert np.array_equal(state, state.T)
        assert np.min(np.linalg.eigvalsh(state)) > 0
        assert symplectic_eigenvalues(state)[0] >= 0.5 - 1e-9


@pytest.mark.parametrize('t_grid', [[0.5, 1.0], [0.0, 1.0, 1.0], [0.0, 2.0, 1.0], []])
def test_bad_time_grid_rejected(toy_system, t_grid):
    F, D = toy_system
    with pytest.raises(ValueError):
        evolve_cm(F, D, vacuum_cm(), t_grid)


# ============================================
# Symplectic spectrum
# ============================================

def test_vacuum_spectrum():
    assert np.allclose(symplectic_eigenvalues(vacuum_cm()), [0.5, 0.5, 0.5], atol=1e-14)


def test_thermal_product_spectrum():
    gamma = np.diag([0.5, 0.5, 1.5, 1.5, 3.0, 3.0])
    assert np.allclose(symplectic_eigenvalues(gamma), [0.5, 1.5, 3.0], rtol=1e-12)


def test_two_mode_squeezed_state_is_pure():
    assert np.allclose(symplectic_eigenvalues(two_mode_squeezed_cm(0.8)), [0.5, 0.5], atol=1e-12)


def test_spectrum_invariant_under_local_rotations(rng):
    gamma = random_physical_cm(3, rng)
    S = local_symplectic([rotation(0.3), rotation(1.1), rotation(-2.0)])
    assert np.allclose(symplectic_eigenvalues(S @ gamma @ S.T), symplectic_eigenvalues(gamma), rtol=1e-9)


def test_asymmetric_input_rejected():
    gamma = vacuum_cm()
    gamma[0, 1] = 0.1
    with pytest.raises(AsymmetricInput):
        symplectic_eigenvalues(gamma)


def test_indefinite_input_has_unpaired_spectrum():
    with pytest.raises(NonPairedSpectrum):
        symplectic_eigenvalues(np.diag([1.0, -1.0]))
