from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Grid:
    """Uniform node grid ``x_j = j h``, ``j = 0..n``, on the truncated half line ``[0, L]``."""

    L: float
    n: int
    x: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError(f"L must be positive, got {self.L}")
        if int(self.n) != self.n or self.n < 16:
            raise ValueError(f"n must be an integer >= 16, got {self.n}")
        x = np.arange(self.n + 1, dtype=float) * (self.L / self.n)
        x[-1] = self.L
        x.setflags(write=False)
        object.__setattr__(self, "x", x)

    @property
    def h(self) -> float:
        return self.L / self.n

    def refine(self, factor: int = 2) -> Grid:
        return Grid(self.L, self.n * factor)


def ddx(f: np.ndarray, h: float) -> np.ndarray:
    """Central differences with second-order one-sided closures at both ends."""
    return np.gradient(f, h, edge_order=2)


def trapezoid(f: np.ndarray, h: float) -> float:
    return float(h * (f.sum() - 0.5 * (f[0] + f[-1])))
