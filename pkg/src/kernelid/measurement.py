"""Synthetic boundary measurements: downsampling, noise and the signal file format.

Signal files are UTF-8 text with a ``t,value`` header followed by one
``t,value`` row per sample, uniform time step, first time 0.  Values are
written with 17 significant digits, so a write/read round trip is lossless.

Noise is drawn from numpy's PCG64 generator seeded by
``SeedSequence([seed, stream])``, which is platform independent: a published
``(seed, stream)`` pair reproduces the same corruption everywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .kernel import UniformGrid
from .signals import Signal, check_same_grid

HEADER = "t,value"

#: Noise stream index of each measured signal.
NOISE_STREAMS = {"K": 0, "Yf": 1, "y_xi": 2, "y_eta": 3}


class SignalFormatError(ValueError):
    """A signal file does not follow the ``t,value`` format."""


class EmptySignalFileError(SignalFormatError):
    """The signal file has no content at all."""


@dataclass(frozen=True)
class MeasurementSet:
    """Observed boundary signals sharing one measurement grid, plus provenance."""

    K: Signal | None = None
    Yf: Signal | None = None
    y_xi: Signal | None = None
    y_eta: Signal | None = None
    noise_level: float = 0.0
    seed: int = 0
    input_descriptor: str = ""
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        present = self.signals()
        if not present:
            raise ValueError("a measurement set needs at least one signal")
        check_same_grid(*present.values())

    def signals(self) -> dict[str, Signal]:
        return {
            name: s
            for name, s in (("K", self.K), ("Yf", self.Yf), ("y_xi", self.y_xi), ("y_eta", self.y_eta))
            if s is not None
        }

    @property
    def grid(self) -> UniformGrid:
        return next(iter(self.signals().values())).grid


def downsample(fine: Signal, rate: float) -> Signal:
    """Keep the fine samples that fall on a grid with ``rate`` samples per time unit."""
    if not rate > 0:
        raise ValueError(f"measurement rate must be positive, got {rate!r}")
    ratio = (1.0 / rate) / fine.step
    stride = int(round(ratio))
    if stride < 1 or abs(ratio - stride) > 1e-12 * max(1.0, ratio) + 1e-12:
        raise ValueError(
            f"fine step {fine.step!r} does not divide the measurement step {1.0 / rate!r}"
        )
    if fine.grid.count % stride:
        raise ValueError(
            f"horizon {fine.grid.horizon!r} is not a whole number of measurement steps"
        )
    grid = UniformGrid(fine.step * stride, fine.grid.count // stride)
    return Signal(grid, fine.values[::stride])


def noise_generator(seed: int, stream: int = 0) -> np.random.Generator:
    if int(seed) != seed or seed < 0:
        raise ValueError(f"seed must be a non-negative integer, got {seed!r}")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(stream)])))


def add_noise(
    s: Signal, level: float, seed: int, stream: int = 0, distribution: str = "uniform"
) -> Signal:
    """Relative noise: each sample ``v`` becomes ``v * (1 + level * u)``.

    ``u`` is uniform on ``[-1, 1]`` (so ``level`` is a hard bound on the
    relative error) or, with ``distribution="gaussian"``, standard normal.
    """
    if not level >= 0:
        raise ValueError(f"noise level must be non-negative, got {level!r}")
    rng = noise_generator(seed, stream)
    if distribution == "uniform":
        u = rng.uniform(-1.0, 1.0, size=len(s))
    elif distribution == "gaussian":
        u = rng.standard_normal(size=len(s))
    else:
        raise ValueError(f"unknown noise distribution {distribution!r}")
    if level == 0:
        return s.with_values(s.values.copy())
    return s.with_values(s.values * (1.0 + level * u))


def format_signal(s: Signal) -> str:
    lines = [HEADER]
    for t, v in zip(s.times, s.values):
        lines.append(f"{t:.17g},{v:.17g}")
    return "\n".join(lines) + "\n"


def write_signal(s: Signal, path) -> None:
    Path(path).write_text(format_signal(s), encoding="utf-8")


def parse_signal(text: str, source: str = "<string>") -> Signal:
    if not text.strip():
        raise EmptySignalFileError(f"{source}: empty signal file")
    lines = text.splitlines()
    if lines[0].strip() != HEADER:
        raise SignalFormatError(f"{source}:1: expected header {HEADER!r}, got {lines[0]!r}")
    times, values = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise SignalFormatError(f"{source}:{lineno}: expected two columns, got {line!r}")
        try:
            t, v = float(parts[0]), float(parts[1])
        except ValueError:
            raise SignalFormatError(f"{source}:{lineno}: not a number in {line!r}") from None
        if not (math.isfinite(t) and math.isfinite(v)):
            raise SignalFormatError(f"{source}:{lineno}: non-finite entry in {line!r}")
        times.append(t)
        values.append(v)
    if len(times) < 2:
        raise SignalFormatError(f"{source}: a signal needs at least two samples")
    times = np.array(times)
    steps = np.diff(times)
    if np.any(steps <= 0):
        bad = int(np.argmax(steps <= 0)) + 3
        raise SignalFormatError(f"{source}:{bad}: time column is not increasing")
    if abs(times[0]) > 1e-12:
        raise SignalFormatError(f"{source}:2: signals must start at t = 0, got {times[0]!r}")
    step = (times[-1] - times[0]) / (len(times) - 1)
    if np.max(np.abs(steps - step)) > 1e-9 * step:
        raise SignalFormatError(f"{source}: time step is not uniform")
    return Signal(UniformGrid(step, len(times) - 1), values)


def read_signal(path) -> Signal:
    path = Path(path)
    return parse_signal(path.read_text(encoding="utf-8"), source=str(path))
