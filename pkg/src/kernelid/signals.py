"""Real-valued signals sampled on a uniform time grid."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .kernel import UniformGrid


@dataclass(frozen=True)
class Signal:
    """Samples ``values[j]`` taken at ``grid.points[j]``."""

    grid: UniformGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.grid.size,):
            raise ValueError(
                f"signal needs {self.grid.size} samples for its grid, got shape {values.shape}"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, func: Callable[[np.ndarray], np.ndarray], grid: UniformGrid) -> "Signal":
        return cls(grid, func(grid.points))

    @property
    def times(self) -> np.ndarray:
        return self.grid.points

    @property
    def step(self) -> float:
        return self.grid.step

    def __len__(self):
        return self.grid.size

    def with_values(self, values) -> "Signal":
        return Signal(self.grid, values)

    def __neg__(self):
        return self.with_values(-self.values)

    def scaled(self, factor: float) -> "Signal":
        return self.with_values(factor * self.values)


def check_same_grid(*signals: Signal) -> UniformGrid:
    grid = signals[0].grid
    for s in signals[1:]:
        if not grid.same_as(s.grid):
            raise ValueError(
                f"signals live on different grids: {grid} vs {s.grid}"
            )
    return grid
