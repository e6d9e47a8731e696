import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from kernelid import spectral
from kernelid.inverse import (
    DegenerateInitialConditionError,
    IdentificationError,
    InverseConfig,
    ReconstructionReport,
    ZeroInputSlopeError,
    blend_initial_value,
    build_convolution_operator,
    convolve_with_jump,
    estimate_wavefront,
    identify_M_first_kind,
    identify_M_second_kind,
    identify_N_tikhonov,
    identify_N_two_initial,
    integration_operator,
    monotone_projection,
    moving_average,
    numerical_derivative,
    reconstruct,
    relative_l2_error,
)
from kernelid.kernel import UniformGrid
from kernelid.signals import Signal

GRID = UniformGrid(0.1, 50)
FRONT = math.pi / math.sqrt(0.8)
GAMMA = spectral.gamma_functional(spectral.ramp_coefficients(400))


def sig(values, grid=GRID):
    return Signal(grid, values)


def test_relative_error_examples():
    b = sig(np.linspace(1, 2, 51))
    assert relative_l2_error(b, b) == 0.0
    assert relative_l2_error(b.scaled(2.0), b) == pytest.approx(1.0)
    window = sig(np.where(GRID.points < 1.0, 100.0, 1.0))
    assert relative_l2_error(window, sig(np.ones(51)), t_min=1.0) == 0.0
    with pytest.raises(ValueError):
        relative_l2_error(b, sig(np.zeros(51)))
    with pytest.raises(ValueError):
        relative_l2_error(b, Signal(UniformGrid(0.2, 25), np.ones(26)))


def test_numerical_derivative_exact_for_quadratics():
    t = GRID.points
    d = numerical_derivative(sig(3 * t**2 - t + 2))
    np.testing.assert_allclose(d.values, 6 * t - 1, atol=1e-10)
    with pytest.raises(ValueError):
        numerical_derivative(Signal(UniformGrid(0.1, 1), [0.0, 1.0]))


def test_moving_average_examples():
    t = GRID.points
    lin = moving_average(sig(2 * t + 1), 3)
    np.testing.assert_allclose(lin.values[3:-3], (2 * t + 1)[3:-3], atol=1e-12)
    np.testing.assert_allclose(moving_average(sig(t), 3).values[0], np.mean(t[:4]))
    np.testing.assert_array_equal(moving_average(sig(np.sin(t)), 0).values, np.sin(t))
    for bad in (-1, 1.5):
        with pytest.raises(ValueError):
            moving_average(sig(t), bad)


@settings(max_examples=50, deadline=None)
@given(st.floats(-1e3, 1e3), st.integers(0, 10))
def test_moving_average_preserves_constants(c, hw):
    out = moving_average(sig(np.full(51, c)), hw)
    np.testing.assert_allclose(out.values, c, rtol=1e-12, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, 51, elements=st.floats(-100, 100, allow_subnormal=False)))
def test_monotone_projection_properties(values):
    out = monotone_projection(sig(values)).values
    assert np.all(np.diff(out) >= -1e-9)
    assert out.sum() == pytest.approx(values.sum(), abs=1e-6)
    again = monotone_projection(sig(out)).values
    np.testing.assert_allclose(again, out, atol=1e-9)


def test_monotone_projection_example():
    g = UniformGrid(1.0, 2)
    np.testing.assert_allclose(monotone_projection(Signal(g, [3.0, 1.0, 2.0])).values, [2, 2, 2])
    np.testing.assert_array_equal(monotone_projection(Signal(g, [0.0, 1.0, 2.0])).values, [0, 1, 2])


def test_tikhonov_exact_for_quadratic_primitive():
    t = GRID.points
    N = identify_N_tikhonov(sig(0.5 * t**2 + 0.8 * t), lam=0.0)
    np.testing.assert_allclose(N.values, t + 0.8, atol=1e-9)


def test_tikhonov_shrinks_with_lambda():
    t = GRID.points
    M = sig(np.sin(t))
    weak = identify_N_tikhonov(M, 1e-4).values
    strong = identify_N_tikhonov(M, 10.0).values
    assert np.linalg.norm(strong) < np.linalg.norm(weak)
    with pytest.raises(ValueError):
        identify_N_tikhonov(M, -1.0)


def test_integration_operator():
    V = integration_operator(3, 0.5)
    np.testing.assert_array_equal(V @ np.ones(3), [0.5, 1.0, 1.5])


def test_convolution_operator_matches_quadrature():
    g = sig(np.exp(-GRID.points))
    A = build_convolution_operator(g)
    assert np.all(np.triu(A, 1) == 0)
    assert A[0, 0] == 0.0
    np.testing.assert_allclose(A @ np.ones(51), 1 - np.exp(-GRID.points), atol=2e-3)


def test_convolve_with_jump_exact_for_step():
    t = GRID.points
    front = 2.34
    K = sig(np.where(t > front, 1.0, 0.0))
    exact = np.clip(t - front, 0, None)
    np.testing.assert_allclose(convolve_with_jump(sig(np.ones(51)), K, front), exact, atol=1e-12)
    naive = convolve_with_jump(sig(np.ones(51)), K, None)
    assert np.max(np.abs(naive - exact)) > 0.01


def test_wavefront_estimate(toy_data):
    est = estimate_wavefront(toy_data["Yf"])
    assert abs(est - FRONT) <= 0.005
    assert estimate_wavefront(sig(np.zeros(51))) is None
    assert estimate_wavefront(sig(np.ones(51))) is None


def test_first_kind_noiseless(toy_data):
    d = toy_data
    M = identify_M_first_kind(d["K"], d["Yf"], d["g"], 1e-3)
    assert M.values[0] == 0.0
    assert relative_l2_error(M, d["M"]) <= 0.005
    exact_front = identify_M_first_kind(d["K"], d["Yf"], d["g"], 1e-3, FRONT)
    assert relative_l2_error(exact_front, d["M"]) <= 0.005
    with pytest.raises(ValueError):
        identify_M_first_kind(d["K"], d["Yf"], d["g"], 0.0)


def test_first_kind_wave_kernel(wave_data):
    # N = 1: K jumps by -pi at the front with no damping, which excites the
    # alternating mode of the trapezoidal first-kind scheme; plain quadrature is ~9%
    d = wave_data
    M = identify_M_first_kind(d["K"], d["Yf"], d["g"], 1e-3)
    assert relative_l2_error(M, d["M"]) <= 0.02
    plain = identify_M_first_kind(d["K"], d["Yf"], d["g"], 1e-3, None)
    assert relative_l2_error(plain, d["M"]) > 0.05


def test_second_kind_noiseless(toy_data):
    d = toy_data
    M = identify_M_second_kind(d["K"], d["Yf"], d["g"])
    assert M.values[0] == 0.0
    assert relative_l2_error(M, d["M"]) <= 0.03
    with pytest.raises(ZeroInputSlopeError):
        identify_M_second_kind(d["K"], d["Yf"], d["g"].with_values(d["g"].times))


def test_two_initial_noiseless(toy_data):
    d = toy_data
    N = identify_N_two_initial(-d["K"], d["y_eta"], GAMMA)
    assert np.all(np.isfinite(N.values))
    assert relative_l2_error(N, d["N"], t_min=0.2) <= 0.05


@pytest.mark.parametrize("gamma", [0.0, 1e-13, float("nan")])
def test_two_initial_degenerate(toy_data, gamma):
    with pytest.raises(DegenerateInitialConditionError):
        identify_N_two_initial(-toy_data["K"], toy_data["y_eta"], gamma)


def test_blend_initial_value():
    N = blend_initial_value(sig(np.zeros(51)), 1.0)
    np.testing.assert_allclose(N.values[:4], [1.0, 2 / 3, 1 / 3, 0.0])


def test_inverse_config_validation():
    for kwargs in (
        {"lavrentiev_eps": 0.0},
        {"tikhonov_lambda": -1.0},
        {"average_halfwidth": -2},
        {"method": "magic"},
        {"blend_N0": True},
    ):
        with pytest.raises(ValueError):
            InverseConfig(**kwargs)
    cfg = InverseConfig()
    assert cfg.to_dict()["method"] == "first_kind"


def test_reconstruct_routes(toy_data):
    d = toy_data
    for method in ("first_kind", "second_kind"):
        rep = reconstruct(
            InverseConfig(method=method), g=d["g"], K=d["K"], Yf=d["Yf"], truth_M=d["M"], truth_N=d["N"], n_error_tmin=0.3
        )
        assert rep.M_rec.values[0] == 0.0
        assert rep.rel_l2_M <= 0.05
        assert np.all(np.isfinite(rep.N_rec.values))
    rep = reconstruct(
        InverseConfig(method="two_initial", average_halfwidth=0), y_xi=-d["K"], y_eta=d["y_eta"], gamma=GAMMA, truth_N=d["N"], n_error_tmin=0.2
    )
    assert rep.rel_l2_N <= 0.05
    assert rep.M_rec.values[0] == 0.0
    assert rep.rel_l2_M is None


def test_reconstruct_monotone_option(toy_data):
    d = toy_data
    rep = reconstruct(InverseConfig(monotone=True), g=d["g"], K=d["K"], Yf=d["Yf"])
    assert np.all(np.diff(rep.M_rec.values) >= 0)


def test_reconstruct_missing_inputs(toy_data):
    with pytest.raises(IdentificationError, match="Yf"):
        reconstruct(InverseConfig(), g=toy_data["g"], K=toy_data["K"])
    with pytest.raises(IdentificationError, match="gamma"):
        reconstruct(InverseConfig(method="two_initial"), y_xi=toy_data["K"], y_eta=toy_data["y_eta"])


def test_report_requires_pinned_origin():
    s = sig(np.ones(51))
    with pytest.raises(ValueError):
        ReconstructionReport(M_rec=s, N_rec=s, M_raw=s, N_raw=s, config=InverseConfig())
