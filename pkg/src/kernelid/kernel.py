"""Relaxation kernels, their primitives and the time grids they live on.

Two representations are provided: :class:`ExpSumKernel`, a finite sum of
decaying exponentials with closed-form primitive and derivatives, and
:class:`SampledKernel`, plain samples on a :class:`UniformGrid`.  The
sampled form is what the identification stage produces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class UniformGrid:
    """Uniform time grid ``t_j = j * step`` for ``j = 0, ..., count``.

    Note that ``count`` is the number of intervals; the grid has
    ``count + 1`` points.
    """

    step: float
    count: int

    def __post_init__(self):
        if not (self.step > 0 and math.isfinite(self.step)):
            raise ValueError(f"grid step must be positive, got {self.step!r}")
        if int(self.count) != self.count or self.count < 1:
            raise ValueError(f"grid count must be an integer >= 1, got {self.count!r}")
        object.__setattr__(self, "count", int(self.count))

    @classmethod
    def from_horizon(cls, horizon: float, step: float) -> "UniformGrid":
        """Grid on ``[0, horizon]``; ``horizon / step`` must be an integer."""
        ratio = horizon / step
        count = int(round(ratio))
        if abs(ratio - count) > 1e-9 * max(1.0, ratio):
            raise ValueError(
                f"horizon {horizon!r} is not an integer multiple of step {step!r}"
            )
        return cls(step, count)

    @property
    def horizon(self) -> float:
        return self.step * self.count

    @property
    def size(self) -> int:
        return self.count + 1

    @property
    def points(self) -> np.ndarray:
        return self.step * np.arange(self.count + 1, dtype=float)

    def same_as(self, other: "UniformGrid", rtol: float = 1e-12) -> bool:
        return self.count == other.count and math.isclose(
            self.step, other.step, rel_tol=rtol, abs_tol=0.0
        )


@dataclass(frozen=True)
class ExpSumKernel:
    """Kernel ``N(t) = sum_k c_k exp(-tau_k t)``.

    Parameters
    ----------
    terms : sequence of (c, tau) pairs
        Amplitudes ``c > 0`` and decay rates ``tau >= 0``.  A zero rate gives
        a constant component.
    """

    terms: tuple[tuple[float, float], ...]

    def __init__(self, terms: Sequence[Sequence[float]]):
        cleaned = []
        for pair in terms:
            if len(pair) != 2:
                raise ValueError(f"kernel term must be a (c, tau) pair, got {pair!r}")
            c, tau = float(pair[0]), float(pair[1])
            if not (math.isfinite(c) and math.isfinite(tau)):
                raise ValueError(f"kernel term must be finite, got {pair!r}")
            if c <= 0:
                raise ValueError(f"kernel amplitude must be positive, got {c!r}")
            if tau < 0:
                raise ValueError(f"kernel decay rate must be non-negative, got {tau!r}")
            cleaned.append((c, tau))
        if not cleaned:
            raise ValueError("kernel needs at least one term")
        object.__setattr__(self, "terms", tuple(cleaned))

    @property
    def amplitudes(self) -> np.ndarray:
        return np.array([c for c, _ in self.terms])

    @property
    def rates(self) -> np.ndarray:
        return np.array([tau for _, tau in self.terms])

    def __call__(self, t):
        return eval_kernel(self, t)

    def primitive(self, t):
        return kernel_primitive(self, t)

    def derivative(self, t, order: int = 1):
        """``d^order N / dt^order`` evaluated at ``t``."""
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for c, tau in self.terms:
            out = out + c * (-tau) ** order * np.exp(-tau * t)
        return out if out.ndim else float(out)

    @property
    def initial_value(self) -> float:
        return float(sum(c for c, _ in self.terms))

    def as_pairs(self) -> list[list[float]]:
        return [[c, tau] for c, tau in self.terms]


@dataclass(frozen=True)
class SampledKernel:
    """Kernel samples ``N(t_j)`` on a grid starting at ``t = 0``."""

    grid: UniformGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.size,):
            raise ValueError(
                f"expected {self.grid.size} kernel samples, got shape {values.shape}"
            )
        if not values[0] > 0:
            raise ValueError(f"sampled kernel needs N(0) > 0, got {values[0]!r}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def initial_value(self) -> float:
        return float(self.values[0])


def _check_time(t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("kernel is only defined for t >= 0")
    return t


def eval_kernel(k: ExpSumKernel, t):
    """Evaluate ``N(t)``; accepts scalars or arrays."""
    t = _check_time(t)
    out = np.zeros_like(t)
    for c, tau in k.terms:
        out = out + c * np.exp(-tau * t)
    return out if out.ndim else float(out)


def kernel_primitive(k: ExpSumKernel, t):
    """Evaluate ``M(t) = int_0^t N(s) ds``.

    ``-expm1`` keeps the small-``tau * t`` regime accurate.
    """
    t = _check_time(t)
    out = np.zeros_like(t)
    for c, tau in k.terms:
        if tau == 0.0:
            out = out + c * t
        else:
            out = out - (c / tau) * np.expm1(-tau * t)
    return out if out.ndim else float(out)


def normalize_speed(k: ExpSumKernel, c: float) -> ExpSumKernel:
    """Rescale time so that ``N1(t) = N(t / c) / c``.

    With ``c = N(0)`` the rescaled kernel has ``N1(0) = 1``.
    """
    if not (c > 0 and math.isfinite(c)):
        raise ValueError(f"speed must be positive, got {c!r}")
    return ExpSumKernel([(a / c, tau / c) for a, tau in k.terms])


def alpha_of(k: ExpSumKernel) -> float:
    """Damping exponent ``alpha = -N'(0) / 2``."""
    return 0.5 * sum(c * tau for c, tau in k.terms)


def sample_kernel(k: ExpSumKernel, grid: UniformGrid) -> SampledKernel:
    return SampledKernel(grid, eval_kernel(k, grid.points))


TOY_KERNEL = ExpSumKernel([(0.1, 0.5), (0.2, 2.0), (0.5, 3.0)])
