"""Uniform-grid quadrature, cumulative integration and differentiation.

All rules are fourth order.  The closed quadrature weights are the sums of
the per-cell cumulative weights, so ``cumulative(f)[-1] == weights @ f``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "GridFunction",
    "check_uniform",
    "quadrature_weights",
    "cumulative_integral",
    "derivative",
]


def check_uniform(x: np.ndarray) -> float:
    x = np.asarray(x, dtype=float)
    if x.size < 5:
        raise ValueError("need at least 5 grid nodes")
    h = (x[-1] - x[0]) / (x.size - 1)
    if not np.allclose(np.diff(x), h, rtol=1e-9, atol=0):
        raise ValueError("grid must be uniform")
    return float(h)


def _cell_integrals(f: np.ndarray, h: float) -> np.ndarray:
    """Integral of the local cubic interpolant over each cell, along axis 0."""
    n = f.shape[0]
    cells = np.empty((n - 1,) + f.shape[1:], dtype=np.result_type(f, float))
    cells[1:-1] = (-f[:-3] + 13 * f[1:-2] + 13 * f[2:-1] - f[3:]) * (h / 24)
    cells[0] = (9 * f[0] + 19 * f[1] - 5 * f[2] + f[3]) * (h / 24)
    cells[-1] = (f[-4] - 5 * f[-3] + 19 * f[-2] + 9 * f[-1]) * (h / 24)
    return cells


def cumulative_integral(f, x) -> np.ndarray:
    """F(x_i) = int_{x_0}^{x_i} f, same shape as f (F[0] = 0)."""
    h = check_uniform(x)
    f = np.asarray(f)
    out = np.zeros(f.shape, dtype=np.result_type(f, float))
    np.cumsum(_cell_integrals(f, h), axis=0, out=out[1:])
    return out


def quadrature_weights(x) -> np.ndarray:
    h = check_uniform(x)
    n = len(x)
    return _cell_integrals(np.eye(n), h).sum(axis=0)


def derivative(f, x) -> np.ndarray:
    """Fourth-order finite-difference derivative along axis 0."""
    h = check_uniform(x)
    f = np.asarray(f)
    d = np.empty(f.shape, dtype=np.result_type(f, float))
    d[2:-2] = (f[:-4] - 8 * f[1:-3] + 8 * f[3:-1] - f[4:]) / (12 * h)
    d[0] = (-25 * f[0] + 48 * f[1] - 36 * f[2] + 16 * f[3] - 3 * f[4]) / (12 * h)
    d[1] = (-3 * f[0] - 10 * f[1] + 18 * f[2] - 6 * f[3] + f[4]) / (12 * h)
    d[-1] = (25 * f[-1] - 48 * f[-2] + 36 * f[-3] - 16 * f[-4] + 3 * f[-5]) / (12 * h)
    d[-2] = (3 * f[-1] + 10 * f[-2] - 18 * f[-3] + 6 * f[-4] - f[-5]) / (12 * h)
    return d


@dataclass(frozen=True, eq=False)
class GridFunction:
    """A C^{2r}-valued function sampled on a uniform grid of [0, 1]."""

    x: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        v = np.asarray(self.values, dtype=complex)
        if v.shape[0] != x.size:
            raise ValueError("values must have one row per grid node")
        check_uniform(x)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_callable(cls, func, x) -> "GridFunction":
        x = np.asarray(x, dtype=float)
        return cls(x, func(x))

    @property
    def weights(self) -> np.ndarray:
        return quadrature_weights(self.x)

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def norm(self) -> float:
        w = self.weights
        return float(np.sqrt(np.sum(w * np.sum(np.abs(self.values) ** 2, axis=1))))

    def inner(self, other: "GridFunction") -> complex:
        """<self, other> = int other^* self."""
        return complex(np.sum(self.weights * np.sum(np.conj(other.values) * self.values, axis=1)))

    def __add__(self, other):
        return GridFunction(self.x, self.values + other.values)

    def __sub__(self, other):
        return GridFunction(self.x, self.values - other.values)

    def __mul__(self, c):
        return GridFunction(self.x, self.values * c)

    __rmul__ = __mul__
