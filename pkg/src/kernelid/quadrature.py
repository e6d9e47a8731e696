"""Trapezoidal product quadrature for causal convolutions on a uniform grid."""

from __future__ import annotations

import numpy as np
from scipy.signal import fftconvolve


def trapezoid_convolution(a, b, step: float) -> np.ndarray:
    """Approximate ``(a * b)(t_i) = int_0^{t_i} a(t_i - s) b(s) ds``.

    Uses the composite trapezoidal rule on the samples, so the result is
    ``step * (sum_{j=0}^{i} a_{i-j} b_j - (a_i b_0 + a_0 b_i) / 2)``.
    Leading axes of ``a`` and ``b`` broadcast; the convolution runs along the
    last axis.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    m = a.shape[-1]
    if b.shape[-1] != m:
        raise ValueError("convolution operands must have the same length")
    if np.ndim(a) == 1 and np.ndim(b) == 1 and m <= 2048:
        full = np.convolve(a, b)[:m]
    else:
        a2, b2 = np.broadcast_arrays(a, b)
        full = fftconvolve(a2, b2, axes=-1)[..., :m]
    out = step * (full - 0.5 * (a * b[..., :1] + a[..., :1] * b))
    out[..., 0] = 0.0
    return out


def trapezoid_weights_matrix(kernel, step: float) -> np.ndarray:
    """Lower-triangular matrix ``A`` with ``A @ u == trapezoid_convolution(kernel, u)``."""
    kernel = np.asarray(kernel, dtype=float)
    m = kernel.size
    idx = np.arange(m)
    diff = idx[:, None] - idx[None, :]
    A = np.where(diff >= 0, kernel[np.clip(diff, 0, None)], 0.0)
    A[:, 0] *= 0.5
    A[idx, idx] *= 0.5
    A[0, 0] = 0.0
    return step * A


def cumulative_trapezoid(values, step: float) -> np.ndarray:
    """Running integral from 0, same length as ``values``."""
    values = np.asarray(values, dtype=float)
    out = np.zeros_like(values)
    out[1:] = np.cumsum(0.5 * step * (values[1:] + values[:-1]))
    return out
