import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from conftest import WAVE_KERNEL, max_abs
from kernelid import spectral
from kernelid.kernel import (
    TOY_KERNEL,
    ExpSumKernel,
    UniformGrid,
    alpha_of,
    normalize_speed,
    sample_kernel,
)
from kernelid.signals import Signal


def expm_mode(k, n, t):
    """Exact ``(z_n, z_n')`` from the augmented linear system ``z' = -n^2 sum w_i, w_i' = c_i z - tau_i w_i``."""
    c = np.array([a for a, _ in k.terms])
    tau = np.array([b for _, b in k.terms])
    A = np.zeros((c.size + 1, c.size + 1))
    A[0, 1:] = -float(n) ** 2
    A[1:, 0] = c
    A[1:, 1:] = -np.diag(tau)
    rows = [expm(A * s)[:, 0] for s in t]
    z = np.array([r[0] for r in rows])
    zp = np.array([A[0] @ r for r in rows])
    return z, zp


def test_initial_values_exact(toy_modes):
    for m in toy_modes:
        assert m.z[0] == 1.0
        assert m.zprime[0] == 0.0


@pytest.mark.parametrize("n", [1, 7, 50, 200])
def test_expsum_solver_matches_matrix_exponential(toy_modes, n):
    m = toy_modes[n - 1]
    assert m.n == n
    idx = np.arange(0, m.grid.size, 250)
    z, zp = expm_mode(TOY_KERNEL, n, m.grid.points[idx])
    assert max_abs(m.z[idx] - z) <= 1e-7
    assert max_abs(m.zprime[idx] - zp) <= 1e-6 * n


def test_frozen_mode_samples(toy_modes):
    # regression values, checked against the matrix-exponential oracle above
    assert toy_modes[0].z[1000] == pytest.approx(0.798129644192095, abs=1e-9)
    assert toy_modes[6].z[1000] == pytest.approx(0.28067195379656884, abs=1e-9)
    assert toy_modes[49].zprime[5000] == pytest.approx(0.042217399210970605, abs=1e-7)


def test_wave_modes_are_cosines(wave_modes):
    for m in wave_modes[:50]:
        t = m.grid.points
        assert max_abs(m.z - np.cos(m.n * t)) <= 1e-6
        assert max_abs(m.zprime + m.n * np.sin(m.n * t)) <= 1e-6 * m.n


def test_single_mode_wrapper_matches_batch(toy_modes, fine_grid):
    single = spectral.solve_mode_expsum(TOY_KERNEL, 13, fine_grid)
    np.testing.assert_array_equal(single.z, toy_modes[12].z)


def test_substeps_respect_limits():
    for n in (1, 10, 400):
        sub = spectral.mode_substeps(TOY_KERNEL, n, 1e-3)
        omega = n * np.sqrt(0.8) + 3.0
        assert omega * 1e-3 / sub <= spectral.DEFAULT_PHASE_STEP + 1e-15
        assert n * 1e-3 / sub <= spectral.STABILITY_LIMIT


@pytest.mark.parametrize("n", [0, -1, 2.5])
def test_bad_mode_index(fine_grid, n):
    with pytest.raises(ValueError):
        spectral.solve_mode_expsum(TOY_KERNEL, n, fine_grid)


def test_general_solver_on_sampled_kernel():
    grid = UniformGrid.from_horizon(5.0, 1e-3)
    sampled = sample_kernel(TOY_KERNEL, grid)
    for n in (1, 20):
        m = spectral.solve_mode_general(sampled, n, grid)
        assert m.z[0] == 1.0 and m.zprime[0] == 0.0
        idx = np.arange(0, grid.size, 500)
        z, zp = expm_mode(TOY_KERNEL, n, grid.points[idx])
        assert max_abs(m.z[idx] - z) <= 1e-5
        assert max_abs(m.zprime[idx] - zp) <= 1e-5 * n


def test_general_solver_grid_mismatch():
    sampled = sample_kernel(TOY_KERNEL, UniformGrid(0.01, 100))
    with pytest.raises(ValueError):
        spectral.solve_mode_general(sampled, 1, UniformGrid(0.02, 50))


def test_ramp_and_gamma():
    ramp = spectral.ramp_coefficients(400)
    assert ramp.coefficients[0] == 1.0
    assert ramp.coefficients[3] == 0.25
    assert spectral.gamma_functional(ramp) == pytest.approx(-np.pi**2 / 12, abs=1e-5)
    assert spectral.gamma_functional(spectral.InitialCondition([0.0, 1.0])) == pytest.approx(0.5)
    assert spectral.gamma_functional(spectral.InitialCondition([1.0])) == pytest.approx(-1.0)
    np.testing.assert_allclose(
        spectral.eta_from_xi(spectral.InitialCondition([1.0, 1.0, 3.0])).coefficients, [1.0, 0.25, 1.0 / 3.0]
    )
    for bad in (0, -2):
        with pytest.raises(ValueError):
            spectral.ramp_coefficients(bad)
    with pytest.raises(ValueError):
        spectral.InitialCondition([])


def test_sawtooth_values():
    x = np.array([0.0, 1.0, -1.0, 2 * np.pi + 1.0, 3.0])
    np.testing.assert_allclose(spectral.sawtooth(x), [0.0, 0.5, -0.5, 0.5, 1.5], atol=1e-14)


def test_wave_parameters():
    assert spectral.wave_parameters(WAVE_KERNEL) == (1.0, 0.0)
    c, a = spectral.wave_parameters(TOY_KERNEL)
    assert c == pytest.approx(np.sqrt(0.8))
    assert a == pytest.approx(0.975 / 0.8)


def test_K_equals_negated_ramp_flux(toy_modes):
    raw = spectral.compute_K(toy_modes, 400, accelerate=False)
    ramp_flux = spectral.flux_from_initial(spectral.ramp_coefficients(400), toy_modes)
    assert max_abs(raw.values + ramp_flux.values) <= 1e-12


def test_accelerated_K_close_to_raw_away_from_front(toy_modes):
    acc = spectral.compute_K(toy_modes, 400, TOY_KERNEL)
    raw = spectral.compute_K(toy_modes, 400, accelerate=False)
    t = acc.times
    mask = (t > 0.2) & (np.abs(t - np.pi / np.sqrt(0.8)) > 0.3)
    assert max_abs((acc.values - raw.values)[mask]) <= 2e-3
    assert acc.values[0] == 0.0


def test_frozen_K_samples(toy_modes):
    K = spectral.compute_K(toy_modes, 400, TOY_KERNEL)
    np.testing.assert_allclose(K.values[[1000, 2500, 3000, 5000]], [0.1617657, 0.20429895, 0.21088723, 0.07220866], atol=2e-6)


def test_accelerate_needs_kernel(toy_modes):
    with pytest.raises(ValueError):
        spectral.compute_K(toy_modes, 10)


def test_missing_modes(toy_modes):
    with pytest.raises(ValueError):
        spectral.compute_K(toy_modes[:5], 10, TOY_KERNEL)


def test_single_mode_flux_examples(toy_modes):
    one = spectral.flux_from_initial(spectral.InitialCondition([1.0]), toy_modes)
    np.testing.assert_allclose(one.values, toy_modes[0].zprime)
    two = spectral.flux_from_initial(spectral.InitialCondition([0.0, 1.0]), toy_modes)
    np.testing.assert_allclose(two.values, -0.5 * toy_modes[1].zprime)


def test_wave_flux_vanishes_before_front(wave_modes, fine_grid):
    K = spectral.compute_K(wave_modes, 400, WAVE_KERNEL)
    g = spectral.boundary_input("one_minus_exp", fine_grid)
    Y = spectral.flux_from_boundary(g, K, spectral.primitive_signal(WAVE_KERNEL, fine_grid))
    t = fine_grid.points
    assert max_abs(Y.values[t <= np.pi - 0.1]) <= 1e-3 * max_abs(Y.values)


def test_mode_residual_wave_is_zero(wave_modes):
    for m in wave_modes[:100:9]:
        assert spectral.lemma_residual(m, 0.0) <= 1e-6 * m.n


def test_mode_residual_starts_at_zero(toy_modes):
    m = toy_modes[3]
    assert m.zprime[0] / m.n + np.sin(0.0) == 0.0


def test_normalized_mode_residual_bounded():
    k = normalize_speed(TOY_KERNEL, 0.8)
    grid = UniformGrid.from_horizon(5.0, 1e-3)
    modes = spectral.solve_modes_expsum(k, 200, grid)
    r = np.array([spectral.lemma_residual(m, alpha_of(k)) for m in modes])
    assert r[100:].max() <= 1.5 * r[:100].max()


def test_boundary_inputs(fine_grid):
    g = spectral.boundary_input("one_minus_exp", fine_grid)
    assert g.f0_prime == 1.0
    t = fine_grid.points
    assert max_abs(g.f.values - (1 - np.exp(-t))) <= 1e-6
    h = spectral.boundary_input("t_over_1_plus_t", fine_grid)
    assert max_abs(h.f.values - t / (1 + t)) <= 1e-6
    with pytest.raises(ValueError):
        spectral.boundary_input("step", fine_grid)


def test_flux_from_boundary_grid_check(fine_grid):
    g = spectral.boundary_input("one_minus_exp", fine_grid)
    other = Signal(UniformGrid(1e-2, 500), np.zeros(501))
    with pytest.raises(ValueError):
        spectral.flux_from_boundary(g, other, other)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-2.0, 2.0), min_size=1, max_size=20))
def test_flux_is_linear_in_initial_condition(toy_modes, coeffs):
    xi = spectral.InitialCondition(coeffs)
    a = spectral.flux_from_initial(xi, toy_modes).values
    b = spectral.flux_from_initial(-xi, toy_modes).values
    assert max_abs(a + b) <= 1e-12


@settings(max_examples=25, deadline=None)
@given(st.floats(0.05, 5.0), st.floats(0.0, 3.0), st.integers(1, 30))
def test_modes_bounded_for_positive_kernels(c, tau, n):
    grid = UniformGrid.from_horizon(3.0, 1e-2)
    m = spectral.solve_mode_expsum(ExpSumKernel([(c, tau)]), n, grid)
    # c z^2 + n^2 w^2 is non-increasing for a single decaying exponential
    assert np.all(np.abs(m.z) <= 1.0 + 1e-6)
