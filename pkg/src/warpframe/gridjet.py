"""Second-order forward-mode jets of chart functions sampled on a grid.

A ``GridJet`` carries per-node value, chart gradient and chart Hessian, so
closed-form immersions yield exact first and second partials without finite
differences.
"""

from __future__ import annotations

import numpy as np

from .chart import ChartGrid
from .expr import ScalarField1D


class GridJet:
    __slots__ = ("value", "grad", "hess")

    def __init__(self, value, grad, hess):
        self.value = value
        self.grad = grad
        self.hess = hess

    @classmethod
    def coordinate(cls, grid: ChartGrid, axis: int) -> "GridJet":
        coords = grid.coords()
        value = coords[axis]
        grad = np.zeros(value.shape + (grid.dim,))
        grad[..., axis] = 1.0
        return cls(value, grad, np.zeros(value.shape + (grid.dim, grid.dim)))

    @classmethod
    def constant(cls, grid: ChartGrid, c: float) -> "GridJet":
        value = np.full(grid.shape, float(c))
        return cls(value, np.zeros(grid.shape + (grid.dim,)), np.zeros(grid.shape + (grid.dim, grid.dim)))

    def _lift(self, other):
        if isinstance(other, GridJet):
            return other
        value = np.broadcast_to(np.asarray(other, dtype=float), self.value.shape)
        return GridJet(value, np.zeros_like(self.grad), np.zeros_like(self.hess))

    def __add__(self, other):
        o = self._lift(other)
        return GridJet(self.value + o.value, self.grad + o.grad, self.hess + o.hess)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._lift(other)
        return GridJet(self.value - o.value, self.grad - o.grad, self.hess - o.hess)

    def __rsub__(self, other):
        return self._lift(other) - self

    def __neg__(self):
        return GridJet(-self.value, -self.grad, -self.hess)

    def __mul__(self, other):
        o = self._lift(other)
        outer = self.grad[..., :, None] * o.grad[..., None, :]
        return GridJet(
            self.value * o.value,
            self.grad * o.value[..., None] + self.value[..., None] * o.grad,
            self.hess * o.value[..., None, None]
            + outer
            + np.swapaxes(outer, -1, -2)
            + self.value[..., None, None] * o.hess,
        )

    __rmul__ = __mul__

    def chain(self, f0, f1, f2) -> "GridJet":
        g = self.grad
        return GridJet(
            f0,
            f1[..., None] * g,
            f2[..., None, None] * g[..., :, None] * g[..., None, :] + f1[..., None, None] * self.hess,
        )

    def reciprocal(self):
        x = self.value
        if np.any(np.abs(x) < 1e-300):
            raise ZeroDivisionError("reciprocal of a vanishing jet")
        return self.chain(1.0 / x, -1.0 / x**2, 2.0 / x**3)

    def __truediv__(self, other):
        return self * self._lift(other).reciprocal()

    def __rtruediv__(self, other):
        return self._lift(other) * self.reciprocal()

    def __pow__(self, k: int):
        k = int(k)
        x = self.value
        return self.chain(x**k, k * x ** (k - 1), k * (k - 1) * x ** (k - 2) if k >= 2 else 0.0 * x)

    def sqrt(self):
        x = self.value
        if np.any(x <= 0):
            raise ValueError("sqrt of a non-positive jet")
        r = np.sqrt(x)
        return self.chain(r, 0.5 / r, -0.25 / (r * x))

    def sin(self):
        return self.chain(np.sin(self.value), np.cos(self.value), -np.sin(self.value))

    def cos(self):
        return self.chain(np.cos(self.value), -np.sin(self.value), -np.cos(self.value))

    def sinh(self):
        return self.chain(np.sinh(self.value), np.cosh(self.value), np.sinh(self.value))

    def cosh(self):
        return self.chain(np.cosh(self.value), np.sinh(self.value), np.cosh(self.value))

    def compose(self, f: ScalarField1D) -> "GridJet":
        j = f.jet(self.value)
        return self.chain(np.asarray(j.value), np.asarray(j.d1), np.asarray(j.d2))
