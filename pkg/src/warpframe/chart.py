"""Finite-difference tensor calculus on rectangular chart grids.

Array layout: per-node fields have the node axes first, ``(N0, N1[, N2], ...)``.
A chart-direction axis (for partial derivatives and 1-forms) is inserted right
after the node axes. Two-forms are stored on coordinate pairs ``(a, b)`` with
``a < b`` in lexicographic order.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

DET_FLOOR = 1e-10
MARGIN = 2


@dataclass(frozen=True)
class ChartGrid:
    mins: tuple
    maxs: tuple
    counts: tuple
    names: tuple = ("u", "v", "w")

    def __post_init__(self):
        dim = len(self.counts)
        if dim not in (2, 3):
            raise ValueError("chart dimension must be 2 or 3")
        if len(self.mins) != dim or len(self.maxs) != dim:
            raise ValueError("mins, maxs and counts must have the same length")
        for lo, hi, n in zip(self.mins, self.maxs, self.counts):
            if int(n) < 5:
                raise ValueError("each axis needs at least 5 nodes")
            if not hi > lo:
                raise ValueError("each axis needs max > min")
        object.__setattr__(self, "mins", tuple(float(x) for x in self.mins))
        object.__setattr__(self, "maxs", tuple(float(x) for x in self.maxs))
        object.__setattr__(self, "counts", tuple(int(x) for x in self.counts))
        object.__setattr__(self, "names", tuple(self.names[:dim]))

    @property
    def dim(self) -> int:
        return len(self.counts)

    @property
    def shape(self) -> tuple:
        return self.counts

    @property
    def spacing(self) -> tuple:
        return tuple((hi - lo) / (n - 1) for lo, hi, n in zip(self.mins, self.maxs, self.counts))

    @property
    def axes(self) -> list:
        return [np.linspace(lo, hi, n) for lo, hi, n in zip(self.mins, self.maxs, self.counts)]

    def coords(self) -> list:
        return np.meshgrid(*self.axes, indexing="ij")

    def interior(self, margin: int = MARGIN) -> tuple:
        return tuple(slice(margin, n - margin) for n in self.counts)

    def resized(self, counts) -> "ChartGrid":
        if np.isscalar(counts):
            counts = (int(counts),) * self.dim
        return ChartGrid(self.mins, self.maxs, tuple(counts), self.names)

    def node_coords(self, index) -> tuple:
        return tuple(ax[i] for ax, i in zip(self.axes, index))


def pairs(dim: int) -> list:
    return list(combinations(range(dim), 2))


def _d4(f, h, axis):
    f = np.moveaxis(f, axis, 0)
    out = np.empty_like(f)
    out[2:-2] = (f[:-4] - 8 * f[1:-3] + 8 * f[3:-1] - f[4:]) / (12 * h)
    out[0] = (-25 * f[0] + 48 * f[1] - 36 * f[2] + 16 * f[3] - 3 * f[4]) / (12 * h)
    out[1] = (-3 * f[0] - 10 * f[1] + 18 * f[2] - 6 * f[3] + f[4]) / (12 * h)
    out[-1] = (25 * f[-1] - 48 * f[-2] + 36 * f[-3] - 16 * f[-4] + 3 * f[-5]) / (12 * h)
    out[-2] = (3 * f[-1] + 10 * f[-2] - 18 * f[-3] + 6 * f[-4] - f[-5]) / (12 * h)
    return np.moveaxis(out, 0, axis)


def partial(f, grid: ChartGrid, axis: int, order: int = 2):
    """Partial derivative along chart axis ``axis`` of a per-node field."""
    f = np.asarray(f, dtype=float)
    h = grid.spacing[axis]
    if order == 2:
        return np.gradient(f, h, axis=axis, edge_order=2)
    if order == 4:
        if grid.counts[axis] < 5:
            raise ValueError("4th-order stencil needs 5 nodes")
        return _d4(f, h, axis)
    raise ValueError("order must be 2 or 4")


def gradient(f, grid: ChartGrid, order: int = 2):
    """All chart partials, stacked on a new axis placed after the node axes."""
    return np.stack([partial(f, grid, a, order) for a in range(grid.dim)], axis=grid.dim)


def validate_metric(g, signs=None):
    g = np.asarray(g, dtype=float)
    if not np.all(np.isfinite(g)):
        raise ValueError("metric has non-finite entries")
    if not np.allclose(g, np.swapaxes(g, -1, -2), rtol=0, atol=1e-12):
        raise ValueError("metric is not symmetric")
    det = np.linalg.det(g)
    if np.any(np.abs(det) < DET_FLOOR):
        raise ValueError("metric is degenerate (|det g| < 1e-10)")
    eig = np.linalg.eigvalsh(g)
    neg = np.sum(eig < 0, axis=-1)
    if np.any(neg != neg.flat[0]):
        raise ValueError("metric signature is not constant over the grid")
    if signs is not None and int(neg.flat[0]) != int(np.sum(np.asarray(signs) < 0)):
        raise ValueError("metric signature does not match the frame signs")
    return g


def christoffel(g, grid: ChartGrid, dg=None):
    """Christoffel symbols ``G[..., k, i, j]`` of the metric ``g[..., i, j]``.

    ``dg[..., c, i, j]`` may supply exact partials of the metric; otherwise
    they are taken by finite differences.
    """
    g = np.asarray(g, dtype=float)
    if dg is None:
        dg = gradient(g, grid)
    ginv = np.linalg.inv(g)
    # lowered: G_{l i j} = (d_i g_jl + d_j g_il - d_l g_ij) / 2, dg index order [c, a, b]
    low = 0.5 * (
        np.einsum("...ijl->...lij", dg)
        + np.einsum("...jil->...lij", dg)
        - dg
    )
    gam = np.einsum("...kl,...lij->...kij", ginv, low)
    return 0.5 * (gam + np.swapaxes(gam, -1, -2))


def riemann(g, grid: ChartGrid, dg=None, gamma=None):
    """Lowered curvature ``R[..., i, j, k, l] = <R(d_i, d_j) d_k, d_l>``.

    Convention R(X,Y)Z = D_X D_Y Z - D_Y D_X Z - D_[X,Y] Z.
    """
    g = np.asarray(g, dtype=float)
    if gamma is None:
        gamma = christoffel(g, grid, dg)
    dgam = gradient(gamma, grid)  # [..., i, l, j, k] = d_i G^l_jk
    up = (
        np.einsum("...iljk->...lijk", dgam)
        - np.einsum("...jlik->...lijk", dgam)
        + np.einsum("...lim,...mjk->...lijk", gamma, gamma)
        - np.einsum("...ljm,...mik->...lijk", gamma, gamma)
    )
    low = np.einsum("...wl,...lijk->...ijkw", g, up)
    # the stencil breaks antisymmetry in the last pair at O(h^2); restoring it
    # makes every component independent of how the chart axes are labelled
    return 0.5 * (low - np.swapaxes(low, -1, -2))


def exterior_d(form, grid: ChartGrid, order: int = 2):
    """d of a (possibly matrix-valued) 1-form stored as ``form[..., a, *comp]``."""
    form = np.asarray(form, dtype=float)
    d = grid.dim
    out = []
    for a, b in pairs(d):
        fb = np.take(form, b, axis=d)
        fa = np.take(form, a, axis=d)
        out.append(partial(fb, grid, a, order) - partial(fa, grid, b, order))
    return np.stack(out, axis=d)


def wedge(A, B, dim: int):
    """Wedge of matrix-valued 1-forms ``A[..., a, m, p]`` and ``B[..., a, p, q]``.

    Also accepts a vector-valued ``B[..., a, p]``.
    """
    out = []
    for a, b in pairs(dim):
        Aa, Ab = np.take(A, a, axis=dim), np.take(A, b, axis=dim)
        Ba, Bb = np.take(B, a, axis=dim), np.take(B, b, axis=dim)
        if Ba.ndim == Aa.ndim:
            out.append(Aa @ Bb - Ab @ Ba)
        else:
            out.append(np.einsum("...mp,...p->...m", Aa, Bb) - np.einsum("...mp,...p->...m", Ab, Ba))
    return np.stack(out, axis=dim)


def covariant_vector(V, grid: ChartGrid, gamma, dV=None):
    """``out[..., d, k]`` = (D_{d_d} V)^k for coordinate components ``V[..., k]``."""
    if dV is None:
        dV = gradient(V, grid)
    return dV + np.einsum("...kdl,...l->...dk", gamma, V)


def covariant_11(A, grid: ChartGrid, gamma, dA=None):
    """``out[..., d, k, l]`` = (D_d A)^k_l for a (1,1)-tensor ``A[..., k, l]``."""
    if dA is None:
        dA = gradient(A, grid)
    return (
        dA
        + np.einsum("...kdm,...ml->...dkl", gamma, A)
        - np.einsum("...mdl,...km->...dkl", gamma, A)
    )
