"""Structure conditions of a chart-sampled hypersurface and the warp-recovery remark."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from itertools import product
from typing import Optional

import numpy as np

from . import chart
from .ambient import SignatureData, codazzi_rhs, gauss_rhs, spaceform_coefficients
from .chart import ChartGrid
from .expr import Jet2, ScalarField1D

ORTHO_TOL = 1e-10


@dataclass(frozen=True)
class HypersurfaceData:
    """Abstract data (metric, frame, A, T, T_{n+1}, pi) sampled on a chart grid.

    Shapes, with ``N`` the node shape and ``n`` the chart dimension:

    - ``metric``: N + (n, n), chart components g_ij
    - ``frame``: N + (n, n), ``frame[..., k, i]`` = k-th chart component of e_i
    - ``A``: N + (n, n), ``A[..., i, k]`` = e_i component of A e_k
    - ``T``: N + (n,), T_i = <e_i, T>
    - ``T_np1``, ``pi``: N

    ``metric_d[..., c, i, j]`` and ``frame_d[..., c, k, i]`` optionally carry
    exact chart partials of the metric and frame; without them those partials
    are taken by finite differences.
    """

    grid: ChartGrid
    metric: np.ndarray
    frame: np.ndarray
    A: np.ndarray
    T: np.ndarray
    T_np1: np.ndarray
    pi: np.ndarray
    signs: SignatureData
    warp: ScalarField1D
    metric_d: Optional[np.ndarray] = None
    frame_d: Optional[np.ndarray] = None
    rho: Optional[np.ndarray] = None
    rho_t: Optional[np.ndarray] = None
    rho_b: Optional[np.ndarray] = None
    label: str = ""

    def validate(self, tol: float = ORTHO_TOL):
        n = self.grid.dim
        N = self.grid.shape
        expected = {
            "metric": N + (n, n),
            "frame": N + (n, n),
            "A": N + (n, n),
            "T": N + (n,),
            "T_np1": N,
            "pi": N,
        }
        for name, shape in expected.items():
            arr = getattr(self, name)
            if arr.shape != shape:
                raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} has non-finite entries")
        if self.signs.n != n:
            raise ValueError("signature dimension does not match the chart dimension")
        chart.validate_metric(self.metric, self.signs.frame_signs)
        gram = self.frame_gram()
        target = np.diag(np.array(self.signs.frame_signs, dtype=float))
        err = np.max(np.abs(gram - target))
        if err > tol:
            raise ValueError(f"frame is not orthonormal with the declared signs (error {err:.3e})")
        lo, hi = self.warp.domain
        if np.any(self.pi < lo) or np.any(self.pi > hi):
            raise ValueError("pi leaves the warp domain")
        if np.any(self.warp(self.pi) <= 0):
            raise ValueError("warping function is not positive on the range of pi")
        return self

    def replace(self, **changes) -> "HypersurfaceData":
        return dataclasses.replace(self, **changes)

    # derived fields

    def frame_gram(self):
        return np.einsum("...ki,...kl,...lj->...ij", self.frame, self.metric, self.frame)

    @property
    def eps_frame(self):
        return np.array(self.signs.frame_signs, dtype=float)

    def warp_jet(self) -> Jet2:
        return self.warp.jet(self.pi)

    def frame_inv(self):
        """Coframe: ``out[..., i, k]`` = e_i-component of d_k."""
        return np.einsum("i,...ki,...kl->...il", self.eps_frame, self.frame, self.metric)

    def T_coord(self):
        return np.einsum("...ki,...i->...k", self.frame, self.eps_frame * self.T)

    def A_coord(self):
        return np.einsum("...ki,...ij,...jl->...kl", self.frame, self.A, self.frame_inv())

    def eta(self):
        """eta(d_k) = <d_k, T>."""
        return np.einsum("...kl,...l->...k", self.metric, self.T_coord())

    def christoffel(self):
        return chart.christoffel(self.metric, self.grid, self.metric_d)

    def TT(self):
        return np.sum(self.eps_frame * self.T**2, axis=-1)


@dataclass
class Residual:
    """Max/mean of a non-negative per-node residual over interior nodes."""

    name: str
    field: np.ndarray
    max: float
    mean: float
    argmax: tuple
    argmax_coords: tuple

    def summary(self) -> dict:
        return {
            "max": self.max,
            "mean": self.mean,
            "argmax": list(self.argmax),
            "argmax_coords": list(self.argmax_coords),
        }


def residual(name: str, field_: np.ndarray, grid: ChartGrid, margin: int = chart.MARGIN) -> Residual:
    """Reduce ``field_`` (node axes first, extra axes maxed out) over interior nodes."""
    field_ = np.abs(np.asarray(field_, dtype=float))
    extra = tuple(range(grid.dim, field_.ndim))
    if extra:
        field_ = field_.max(axis=extra)
    if not np.all(np.isfinite(field_)):
        raise ValueError(f"residual {name} has non-finite values")
    inner = field_[grid.interior(margin)]
    local = np.unravel_index(int(np.argmax(inner)), inner.shape)
    idx = tuple(int(i) + margin for i in local)
    return Residual(
        name,
        field_,
        float(inner.max()),
        float(inner.mean()),
        idx,
        tuple(float(x) for x in grid.node_coords(idx)),
    )


@dataclass
class ResidualReport:
    residuals: dict
    spacing: tuple
    meta: dict = field(default_factory=dict)

    def max(self) -> float:
        return max(r.max for r in self.residuals.values())

    def summary(self) -> dict:
        return {
            "spacing": list(self.spacing),
            "conditions": {k: v.summary() for k, v in self.residuals.items()},
            "meta": dict(self.meta),
        }


def _to_frame(data: HypersurfaceData, vec):
    # chart components -> frame components; vec[..., (extra axes), k]
    inv = data.frame_inv()
    extra = vec.ndim - data.grid.dim - 1
    inv = inv.reshape(inv.shape[: data.grid.dim] + (1,) * extra + inv.shape[-2:])
    return np.einsum("...ik,...k->...i", inv, vec)


def check_T_is_grad_pi(data: HypersurfaceData):
    """|eta_k - eps d_k pi| and the closedness |d eta| of eta."""
    eta = data.eta()
    dpi = chart.gradient(data.pi, data.grid)
    r1 = residual("T_grad_pi", eta - data.signs.eps * dpi, data.grid)
    r2 = residual("d_eta", chart.exterior_d(eta, data.grid), data.grid)
    return r1, r2


def check_norm_identity(data: HypersurfaceData) -> Residual:
    """Condition (B): <T,T> + eps_{n+1} T_{n+1}^2 = eps."""
    val = data.TT() + data.signs.eps_normal * data.T_np1**2 - data.signs.eps
    return residual("norm_identity", val, data.grid)


def check_A_selfadjoint(data: HypersurfaceData) -> Residual:
    """Condition (A): <A e_i, e_j> = <e_i, A e_j>."""
    e = data.eps_frame
    # <A e_i, e_j> = eps_j A_ji
    lhs = e[:, None] * data.A  # [j, i] -> eps_j A_ji
    asym = lhs - np.swapaxes(lhs, -1, -2)
    return residual("A_selfadjoint", asym, data.grid)


def nabla_T(data: HypersurfaceData, gamma=None):
    """(D_{d_d} T)^k as ``out[..., d, k]`` with finite-difference partials of T."""
    gamma = data.christoffel() if gamma is None else gamma
    return chart.covariant_vector(data.T_coord(), data.grid, gamma)


def check_nabla_T(data: HypersurfaceData, gamma=None) -> Residual:
    """Condition (C), measured in frame components for every chart direction."""
    s = data.signs
    a = data.warp_jet()
    Tc = data.T_coord()
    eta = data.eta()
    Ac = data.A_coord()
    n = data.grid.dim
    ratio = (a.d1 / a.value)[..., None, None]
    eye = np.broadcast_to(np.eye(n), Ac.shape)
    # rhs[..., d, k] for X = d_d
    rhs = ratio * (eye - s.eps * eta[..., :, None] * Tc[..., None, :])
    rhs = rhs + s.eps_normal * data.T_np1[..., None, None] * np.swapaxes(Ac, -1, -2)
    diff = nabla_T(data, gamma) - rhs
    return residual("nabla_T", _to_frame(data, diff), data.grid)


def check_dT_np1(data: HypersurfaceData) -> Residual:
    """Condition (D): X(T_{n+1}) = -<AT, X> - eps (a'/a) T_{n+1} eta(X)."""
    s = data.signs
    a = data.warp_jet()
    dT = chart.gradient(data.T_np1, data.grid)
    AT = np.einsum("...kl,...l->...k", data.A_coord(), data.T_coord())
    AT_low = np.einsum("...kl,...l->...k", data.metric, AT)
    rhs = -AT_low - s.eps * (a.d1 / a.value * data.T_np1)[..., None] * data.eta()
    return residual("dT_np1", dT - rhs, data.grid)


def check_codazzi(data: HypersurfaceData, gamma=None) -> Residual:
    """Condition (E) on every ordered pair of chart directions, frame components."""
    s = data.signs
    gamma = data.christoffel() if gamma is None else gamma
    Ac = data.A_coord()
    DA = chart.covariant_11(Ac, data.grid, gamma)  # [..., d, k, l]
    n = data.grid.dim
    a = data.warp_jet()
    basis = np.eye(n)
    out = []
    for i, j in product(range(n), repeat=2):
        if i == j:
            continue
        lhs = DA[..., i, :, j] - DA[..., j, :, i]
        X = np.broadcast_to(basis[i], data.T.shape)
        Y = np.broadcast_to(basis[j], data.T.shape)
        rhs = codazzi_rhs(X, Y, data.metric, data.T_coord(), data.T_np1, a, s)
        out.append(_to_frame(data, lhs - rhs))
    return residual("codazzi", np.stack(out, axis=n), data.grid)


def gauss_residual_components(data: HypersurfaceData, gamma=None):
    """``out[..., m]`` = R - target over pairs (i<j, k<l) of chart indices."""
    s = data.signs
    gamma = data.christoffel() if gamma is None else gamma
    R = chart.riemann(data.metric, data.grid, gamma=gamma)
    n = data.grid.dim
    a = data.warp_jet()
    basis = np.eye(n)
    Tc = data.T_coord()
    Ac = data.A_coord()
    out = []
    for (i, j), (k, l) in product(chart.pairs(n), repeat=2):
        vec = [np.broadcast_to(basis[x], Tc.shape) for x in (i, j, k, l)]
        rhs = gauss_rhs(*vec, data.metric, Tc, Ac, a, s)
        out.append(R[..., i, j, k, l] - rhs)
    return np.stack(out, axis=n)


def check_gauss(data: HypersurfaceData, gamma=None) -> Residual:
    """Condition (F) in chart components."""
    return residual("gauss", gauss_residual_components(data, gamma), data.grid)


def verify_structure(data: HypersurfaceData) -> ResidualReport:
    """All structure checks, plus the remark checks when rho fields are present."""
    gamma = data.christoffel()
    t_grad, d_eta = check_T_is_grad_pi(data)
    items = [
        check_A_selfadjoint(data),
        check_norm_identity(data),
        check_nabla_T(data, gamma),
        check_dT_np1(data),
        check_codazzi(data, gamma),
        check_gauss(data, gamma),
        t_grad,
        d_eta,
    ]
    if data.rho is not None:
        items.extend(check_remark_rho(data))
    return ResidualReport({r.name: r for r in items}, data.grid.spacing, {"label": data.label})


# remark: the warp recovered from rho = a o pi


def check_remark_rho(data: HypersurfaceData):
    """|d rho - eps rho_t eta| and |d rho_t - eps rho_b eta|."""
    if data.rho is None or data.rho_t is None or data.rho_b is None:
        raise ValueError("rho, rho_t and rho_b fields are required")
    eps = data.signs.eps
    eta = data.eta()
    r1 = chart.gradient(data.rho, data.grid) - eps * data.rho_t[..., None] * eta
    r2 = chart.gradient(data.rho_t, data.grid) - eps * data.rho_b[..., None] * eta
    return residual("remark_rho", r1, data.grid), residual("remark_rho_t", r2, data.grid)


class InconsistentWarpError(ValueError):
    pass


@dataclass
class WarpTable:
    t: np.ndarray
    a: np.ndarray
    spread: np.ndarray
    counts: np.ndarray
    width: float


@dataclass(frozen=True)
class PiBins:
    labels: np.ndarray  # per-node bin index, grid-shaped
    lo: float
    width: float

    def center(self, label):
        return self.lo + (label + 0.5) * self.width


def pi_bins(data: HypersurfaceData) -> PiBins:
    """Bin nodes by pi with width equal to the largest change of pi across one cell."""
    dpi = chart.gradient(data.pi, data.grid)
    width = float(np.max(np.abs(dpi) * np.asarray(data.grid.spacing)))
    if width <= 0:
        width = 1.0  # pi constant: a single bin
    lo = float(data.pi.min())
    labels = np.floor((data.pi - lo) / width).astype(int)
    return PiBins(labels, lo, width)


def recover_warp(data: HypersurfaceData, tol: float = 1e-6, t_floor: float = 1e-12) -> WarpTable:
    """Tabulate a(t) from rho by binning nodes on pi.

    Within a bin, values are moved to the bin center with the second-order
    Taylor expansion supplied by rho_t and rho_b before comparing them; the
    spread is the largest deviation from the bin median.
    """
    if data.rho is None or data.rho_t is None or data.rho_b is None:
        raise ValueError("rho, rho_t and rho_b fields are required")
    tnorm = np.max(np.abs(data.T), axis=-1)
    if np.any(tnorm <= t_floor):
        raise ValueError("T vanishes on the grid; level sets of pi are not regular")
    bins = pi_bins(data)
    pi, lo, width, idx = data.pi.ravel(), bins.lo, bins.width, bins.labels.ravel()
    rho, rt, rb = data.rho.ravel(), data.rho_t.ravel(), data.rho_b.ravel()
    ts, vals, spreads, counts = [], [], [], []
    for b in np.unique(idx):
        sel = idx == b
        center = lo + (b + 0.5) * width
        delta = pi[sel] - center
        moved = rho[sel] - rt[sel] * delta + 0.5 * rb[sel] * delta**2
        med = float(np.median(moved))
        spread = float(np.max(np.abs(moved - med)))
        if spread > tol:
            raise InconsistentWarpError(
                f"rho is multi-valued on the pi-bin around t={center:.6g} (spread {spread:.3e})"
            )
        ts.append(center)
        vals.append(med)
        spreads.append(spread)
        counts.append(int(sel.sum()))
    return WarpTable(np.array(ts), np.array(vals), np.array(spreads), np.array(counts), width)
