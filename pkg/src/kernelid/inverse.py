"""Identification of ``M(t) = int_0^t N`` and ``N(t)`` from boundary measurements.

Three routes are available:

``first_kind``
    Lavrentiev-regularized solve of ``1/2 g*M = g*K - (pi/2) Y^f``.
``second_kind``
    Forward substitution for the differentiated equation
    ``g(0) M + g'*M = 2 g(0) K + 2 g'*K - pi (Y^f)'``.
``two_initial``
    ``gamma N = (y^eta)' + y^xi * N`` from two initial-condition experiments.

``M`` is then smoothed by a moving average and differentiated with
Tikhonov regularization.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Union

import numpy as np
from scipy.linalg import solve_triangular

from .quadrature import cumulative_trapezoid, trapezoid_weights_matrix
from .signals import Signal, check_same_grid

METHODS = ("first_kind", "second_kind", "two_initial")


class IdentificationError(ValueError):
    """The requested identification is impossible for the given data."""


class DegenerateInitialConditionError(IdentificationError):
    """``sum (-1)^n xi_n / n`` vanishes, so the two-initial route has no second-kind form."""


class ZeroInputSlopeError(IdentificationError):
    """The second-kind route needs ``f'(0) != 0``."""


WavefrontSpec = Union[str, float, None]


@dataclass(frozen=True)
class InverseConfig:
    """Regularization and smoothing parameters for the identification stage.

    ``lavrentiev_eps`` is dimensionless: it is added to the diagonal of the
    quadrature weight matrix (the discrete operator divided by the step).
    ``wavefront`` selects the quadrature of ``g*K`` in the first-kind route:
    ``"auto"`` locates the jump of ``K`` from the data, a number gives its
    time, ``None`` uses the plain trapezoidal rule.
    """

    lavrentiev_eps: float = 0.1
    tikhonov_lambda: float = 0.01
    average_halfwidth: int = 3
    method: str = "first_kind"
    wavefront: WavefrontSpec = "auto"
    monotone: bool = False
    known_N0: float | None = None
    blend_N0: bool = False

    def __post_init__(self):
        if not self.lavrentiev_eps > 0:
            raise ValueError(f"lavrentiev_eps must be positive, got {self.lavrentiev_eps!r}")
        if not self.tikhonov_lambda >= 0:
            raise ValueError(f"tikhonov_lambda must be non-negative, got {self.tikhonov_lambda!r}")
        if int(self.average_halfwidth) != self.average_halfwidth or self.average_halfwidth < 0:
            raise ValueError(
                f"average_halfwidth must be a non-negative integer, got {self.average_halfwidth!r}"
            )
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if isinstance(self.wavefront, str) and self.wavefront != "auto":
            raise ValueError(f"wavefront must be 'auto', a time or None, got {self.wavefront!r}")
        if self.blend_N0 and self.known_N0 is None:
            raise ValueError("blend_N0 needs known_N0")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ReconstructionReport:
    M_rec: Signal
    N_rec: Signal
    M_raw: Signal
    N_raw: Signal
    config: InverseConfig
    seed: int | None = None
    rel_l2_M: float | None = None
    rel_l2_N: float | None = None
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.M_rec.values[0] != 0.0:
            raise ValueError("reconstructed M must vanish at t = 0")


# -- elementary operators ---------------------------------------------------


def build_convolution_operator(g: Signal) -> np.ndarray:
    """Matrix ``A`` with ``(A u)_i ~ int_0^{t_i} g(t_i - s) u(s) ds`` (trapezoidal rule)."""
    return trapezoid_weights_matrix(g.values, g.step)


def numerical_derivative(s: Signal) -> Signal:
    """Central differences inside, second-order one-sided differences at the ends."""
    if len(s) < 3:
        raise ValueError("numerical derivative needs at least 3 samples")
    return s.with_values(np.gradient(s.values, s.step, edge_order=2))


def moving_average(s: Signal, halfwidth: int) -> Signal:
    """Centered mean over ``2*halfwidth + 1`` samples, window truncated at the ends."""
    if int(halfwidth) != halfwidth or halfwidth < 0:
        raise ValueError(f"halfwidth must be a non-negative integer, got {halfwidth!r}")
    halfwidth = int(halfwidth)
    v = s.values
    if halfwidth == 0:
        return s.with_values(v.copy())
    csum = np.concatenate([[0.0], np.cumsum(v)])
    idx = np.arange(v.size)
    lo = np.clip(idx - halfwidth, 0, v.size)
    hi = np.clip(idx + halfwidth + 1, 0, v.size)
    return s.with_values((csum[hi] - csum[lo]) / (hi - lo))


def relative_l2_error(a: Signal, b: Signal, t_min: float = 0.0) -> float:
    """``||a - b|| / ||b||`` over the samples with ``t >= t_min``."""
    check_same_grid(a, b)
    mask = a.times >= t_min - 1e-12 * a.step
    denom = np.linalg.norm(b.values[mask])
    if denom == 0:
        raise ValueError("reference signal vanishes on the error window")
    return float(np.linalg.norm((a.values - b.values)[mask]) / denom)


def monotone_projection(s: Signal) -> Signal:
    """Least-squares non-decreasing fit (pool adjacent violators)."""
    blocks: list[list[float]] = []  # [mean, weight]
    for v in s.values:
        blocks.append([float(v), 1.0])
        while len(blocks) > 1 and blocks[-2][0] > blocks[-1][0]:
            m2, w2 = blocks.pop()
            m1, w1 = blocks.pop()
            blocks.append([(m1 * w1 + m2 * w2) / (w1 + w2), w1 + w2])
    out = np.concatenate([np.full(int(w), m) for m, w in blocks])
    return s.with_values(out)


# -- wavefront-aware quadrature for g*K -------------------------------------


def estimate_wavefront(Yf: Signal, rel_threshold: float = 1e-4) -> float | None:
    """Arrival time of the boundary signal at ``x = pi``.

    ``Y^f`` vanishes until the front arrives and then grows like a smooth
    function of ``t - t*``.  A quadratic through the first three clearly
    nonzero samples is continued back to its root in the last silent
    interval; two samples and a straight line are used when that fails.
    """
    v = Yf.values
    scale = np.max(np.abs(v))
    if scale == 0:
        return None
    nonzero = np.flatnonzero(np.abs(v) > rel_threshold * scale)
    if nonzero.size == 0 or nonzero[0] < 1 or nonzero[0] + 1 >= v.size:
        return None
    i = int(nonzero[0])
    t, h = Yf.times, Yf.step
    lo, hi = t[i - 1], t[i]
    if i + 2 < v.size:
        # in s = (t - t_i) / h the samples sit at s = 0, 1, 2
        a = 0.5 * (v[i + 2] - 2.0 * v[i + 1] + v[i])
        b = v[i + 1] - v[i] - a
        roots = np.roots([a, b, v[i]]) if a != 0 else np.roots([b, v[i]])
        real = [float(r.real) for r in np.atleast_1d(roots) if abs(r.imag) < 1e-12 and -1.0 <= r.real <= 0.0]
        if real:
            return float(t[i] + h * max(real))
    slope = (v[i + 1] - v[i]) / h
    if slope == 0 or np.sign(slope) != np.sign(v[i]):
        return float(hi - 0.5 * h)
    return float(np.clip(hi - v[i] / slope, lo, hi))


def _split_jump(K: Signal, front: float):
    t, v, h = K.times, K.values, K.step
    k = int(math.floor(front / h + 1e-9))
    if k < 1 or k + 2 >= v.size:
        return v, 0.0
    left = v[k] + (v[k] - v[k - 1]) * (front - t[k]) / h
    right = v[k + 1] + (v[k + 2] - v[k + 1]) * (front - t[k + 1]) / h
    jump = right - left
    return v - jump * (t > front), jump


def convolve_with_jump(g: Signal, K: Signal, front: float | None) -> np.ndarray:
    """``g*K`` by the trapezoidal rule, with a jump of ``K`` at ``front`` integrated exactly.

    ``K`` is split into a continuous part plus ``J * H(t - front)``; the step
    term contributes ``J * G(t - front)`` with ``G`` the running integral of
    ``g``.
    """
    A = build_convolution_operator(g)
    if front is None:
        return A @ K.values
    smooth, jump = _split_jump(K, front)
    t = g.times
    G = cumulative_trapezoid(g.values, g.step)
    lag = np.clip(t - front, 0.0, None)
    tail = np.where(t > front, np.interp(lag, t, G), 0.0)
    return A @ smooth + jump * tail


# -- identification routes --------------------------------------------------


def identify_M_first_kind(
    K_meas: Signal,
    Yf_meas: Signal,
    g: Signal,
    eps: float,
    wavefront: WavefrontSpec = "auto",
) -> Signal:
    """Solve ``(eps h I + A/2) m = g*K - (pi/2) Y^f`` by forward substitution.

    ``A`` is the trapezoidal convolution operator of ``g`` and ``h`` the
    measurement step, so ``eps`` is measured against the quadrature weights.
    ``m[0] = 0`` is pinned.
    """
    if not eps > 0:
        raise ValueError(f"Lavrentiev parameter must be positive, got {eps!r}")
    grid = check_same_grid(K_meas, Yf_meas, g)
    if wavefront == "auto":
        front = estimate_wavefront(Yf_meas)
    else:
        front = None if wavefront is None else float(wavefront)
    rhs = convolve_with_jump(g, K_meas, front) - 0.5 * np.pi * Yf_meas.values
    A = build_convolution_operator(g)
    L = eps * grid.step * np.eye(grid.size) + 0.5 * A
    m = np.zeros(grid.size)
    m[1:] = solve_triangular(L[1:, 1:], rhs[1:], lower=True)
    return Signal(grid, m)


def identify_M_second_kind(K_meas: Signal, Yf_meas: Signal, g: Signal) -> Signal:
    """Forward substitution for ``g(0) M + g'*M = 2 g(0) K + 2 g'*K - pi Y'``."""
    grid = check_same_grid(K_meas, Yf_meas, g)
    g0 = float(g.values[0])
    if g0 == 0.0:
        raise ZeroInputSlopeError("second-kind route requires f'(0) != 0")
    B = build_convolution_operator(numerical_derivative(g))
    rhs = 2.0 * g0 * K_meas.values + 2.0 * (B @ K_meas.values) - np.pi * numerical_derivative(Yf_meas).values
    L = g0 * np.eye(grid.size) + B
    m = np.zeros(grid.size)
    m[1:] = solve_triangular(L[1:, 1:], rhs[1:], lower=True)
    return Signal(grid, m)


def identify_N_two_initial(y_xi: Signal, y_eta: Signal, gamma: float) -> Signal:
    """Solve ``gamma N = (y^eta)' + y^xi * N`` by forward substitution."""
    grid = check_same_grid(y_xi, y_eta)
    if not math.isfinite(gamma) or abs(gamma) < 1e-12:
        raise DegenerateInitialConditionError(
            f"sum (-1)^n xi_n / n = {gamma!r} vanishes; choose another initial condition"
        )
    A = build_convolution_operator(y_xi)
    L = gamma * np.eye(grid.size) - A
    return Signal(grid, solve_triangular(L, numerical_derivative(y_eta).values, lower=True))


def integration_operator(size: int, step: float) -> np.ndarray:
    """Running integrals at ``t_1..t_m`` of a function constant on each cell."""
    return step * np.tril(np.ones((size, size)))


def identify_N_tikhonov(M_rec: Signal, lam: float) -> Signal:
    """Regularized derivative of ``M_rec``.

    Minimizes ``||V u - M||^2 + lam^2 ||u||^2`` where ``u`` holds the cell
    values of ``N`` and ``V`` integrates them; the cell values are mapped
    to grid points by averaging neighbours (linear extrapolation at the two
    ends).
    """
    if not lam >= 0:
        raise ValueError(f"Tikhonov parameter must be non-negative, got {lam!r}")
    m = len(M_rec) - 1
    if m < 2:
        raise ValueError("Tikhonov differentiation needs at least 3 samples")
    V = integration_operator(m, M_rec.step)
    target = M_rec.values[1:] - M_rec.values[0]
    cells = np.linalg.solve(V.T @ V + lam**2 * np.eye(m), V.T @ target)
    u = np.empty(m + 1)
    u[1:-1] = 0.5 * (cells[1:] + cells[:-1])
    u[0] = 1.5 * cells[0] - 0.5 * cells[1]
    u[-1] = 1.5 * cells[-1] - 0.5 * cells[-2]
    return M_rec.with_values(u)


def blend_initial_value(N_rec: Signal, n0: float, samples: int = 3) -> Signal:
    """Pull the first ``samples`` values toward the known ``N(0)`` with linearly decaying weight."""
    v = N_rec.values.copy()
    k = min(samples, v.size)
    w = 1.0 - np.arange(k) / samples
    v[:k] = w * n0 + (1.0 - w) * v[:k]
    return N_rec.with_values(v)


def reconstruct(
    config: InverseConfig,
    g: Signal | None = None,
    K: Signal | None = None,
    Yf: Signal | None = None,
    y_xi: Signal | None = None,
    y_eta: Signal | None = None,
    gamma: float | None = None,
    truth_M: Signal | None = None,
    truth_N: Signal | None = None,
    seed: int | None = None,
    n_error_tmin: float = 0.0,
) -> ReconstructionReport:
    """Run the configured route end to end.

    First and second kind: raw ``M`` -> moving average (optionally a
    monotone projection) -> Tikhonov derivative.  Two initial conditions:
    raw ``N`` -> moving average, with ``M`` its running integral.
    Errors against ``truth_M`` / ``truth_N`` are filled in when given
    (``N`` on ``t >= n_error_tmin``).
    """
    method = config.method
    needs = {
        "first_kind": {"K": K, "Yf": Yf, "g": g},
        "second_kind": {"K": K, "Yf": Yf, "g": g},
        "two_initial": {"y_xi": y_xi, "y_eta": y_eta, "gamma": gamma},
    }[method]
    missing = [name for name, value in needs.items() if value is None]
    if missing:
        raise IdentificationError(f"method {method!r} needs {', '.join(missing)}")

    if method == "two_initial":
        N_raw = identify_N_two_initial(y_xi, y_eta, gamma)
        N_rec = moving_average(N_raw, config.average_halfwidth)
        M_raw = N_raw.with_values(cumulative_trapezoid(N_raw.values, N_raw.step))
        M_rec = N_rec.with_values(cumulative_trapezoid(N_rec.values, N_rec.step))
    else:
        if method == "first_kind":
            M_raw = identify_M_first_kind(K, Yf, g, config.lavrentiev_eps, config.wavefront)
        else:
            M_raw = identify_M_second_kind(K, Yf, g)
        M_rec = moving_average(M_raw, config.average_halfwidth)
        if config.monotone:
            M_rec = monotone_projection(M_rec)
        M_rec = M_rec.with_values(np.concatenate([[0.0], M_rec.values[1:]]))
        N_raw = identify_N_tikhonov(M_raw, config.tikhonov_lambda)
        N_rec = identify_N_tikhonov(M_rec, config.tikhonov_lambda)

    if config.blend_N0:
        N_rec = blend_initial_value(N_rec, config.known_N0)

    for name, s in (("M", M_rec), ("N", N_rec)):
        if not np.all(np.isfinite(s.values)):
            raise IdentificationError(f"reconstruction of {name} is not finite")

    rel_M = relative_l2_error(M_rec, truth_M) if truth_M is not None else None
    rel_N = relative_l2_error(N_rec, truth_N, n_error_tmin) if truth_N is not None else None
    return ReconstructionReport(
        M_rec=M_rec,
        N_rec=N_rec,
        M_raw=M_raw,
        N_raw=N_raw,
        config=config,
        seed=seed,
        rel_l2_M=rel_M,
        rel_l2_N=rel_N,
    )
