"""Connection-form matrix, its correction term and the flatness condition.

Index layout of every (n+2)x(n+2) matrix is (0, 1..n, n+1): slot 0 belongs to
the fiber normal e0, slots 1..n to the tangent frame and slot n+1 to the
hypersurface normal. Matrix 1-forms are stored as ``M[..., d, alpha, beta]``
= M_{alpha beta}(d_d).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import chart
from .ambient import SignatureData
from .chart import ChartGrid
from .structure import HypersurfaceData


@dataclass
class FrameFormBundle:
    Omega: np.ndarray
    X: np.ndarray
    Upsilon: np.ndarray
    omega: np.ndarray  # N + (dim, m), omega_0 = omega_{n+1} = 0
    T_ext: np.ndarray  # N + (m,), T_0 = 0
    signs: SignatureData
    grid: ChartGrid

    @property
    def G(self):
        return self.signs.G


def g_skew_error(M, G) -> float:
    """max |M^T G + G M| over all nodes and directions."""
    Gd = np.diag(G)
    lhs = np.swapaxes(M, -1, -2) * Gd[None, :] + Gd[:, None] * M
    return float(np.max(np.abs(lhs))) if M.size else 0.0


def extended_T(data: HypersurfaceData):
    N = data.grid.shape
    m = data.grid.dim + 2
    T = np.zeros(N + (m,))
    T[..., 1:-1] = data.T
    T[..., -1] = data.T_np1
    return T


def dual_forms(data: HypersurfaceData):
    """omega_alpha(d_d) as ``out[..., d, alpha]`` with the two normal slots zero."""
    N = data.grid.shape
    n = data.grid.dim
    out = np.zeros(N + (n, n + 2))
    out[..., 1:-1] = np.swapaxes(data.frame_inv(), -1, -2)
    return out


def frame_derivative(data: HypersurfaceData):
    """``out[..., d, k, j]`` = d_d of the k-th chart component of e_j."""
    if data.frame_d is not None:
        return data.frame_d
    return chart.gradient(data.frame, data.grid)


def build_X(data: HypersurfaceData, omega=None, T_ext=None):
    """X_{ab} = (eps a'/a)(T_b omega_a - eps_a eps_b T_a omega_b)."""
    s = data.signs
    omega = dual_forms(data) if omega is None else omega
    T_ext = extended_T(data) if T_ext is None else T_ext
    a = data.warp_jet()
    Gd = np.array(s.G_diag, dtype=float)
    coef = (s.eps * a.d1 / a.value)[..., None, None, None]
    first = omega[..., :, :, None] * T_ext[..., None, None, :]  # T_b omega_a
    second = (Gd[:, None] * Gd[None, :]) * T_ext[..., None, :, None] * omega[..., :, None, :]
    return coef * (first - second)


def build_connection_forms(data: HypersurfaceData, gamma=None) -> FrameFormBundle:
    """Assemble Omega, X and Upsilon = Omega - X from structure data."""
    s = data.signs
    s.require_frame_layout()
    n = data.grid.dim
    m = n + 2
    N = data.grid.shape
    e = data.eps_frame
    Gd = np.array(s.G_diag, dtype=float)
    gamma = data.christoffel() if gamma is None else gamma
    a = data.warp_jet()

    omega = dual_forms(data)  # [..., d, alpha]
    w = omega[..., 1:-1]  # [..., d, i]
    T_ext = extended_T(data)
    eta = np.einsum("...di,...i->...d", w, data.T)

    # tangent block: omega_ij(d) = eps_i <e_i, D_d e_j>
    dF = frame_derivative(data)
    De = dF + np.einsum("...kdl,...lj->...dkj", gamma, data.frame)
    tangent = np.einsum("...ik,...dkj->...dij", data.frame_inv(), De)

    Om = np.zeros(N + (n, m, m))
    for i in range(n):
        for j in range(i + 1, n):
            Om[..., i + 1, j + 1] = tangent[..., i, j]
            Om[..., j + 1, i + 1] = -e[i] * e[j] * tangent[..., i, j]
    # omega_{i,n+1}(X) = -eps_i <e_i, A X> = -sum_k A_ik omega_k(X)
    shape_col = -np.einsum("...ik,...dk->...di", data.A, w)
    Om[..., 1:-1, -1] = shape_col
    Om[..., -1, 1:-1] = -Gd[-1] * e * shape_col
    # omega_{i0}(X) = -eps_i <e_i, S X>, S X = -sigma0 (X - eps eta(X) T) / (c a)
    ca = (s.c * a.value)[..., None, None]
    fiber_col = s.e0_sign * (w - s.eps * eta[..., :, None] * (e * data.T)[..., None, :]) / ca
    Om[..., 1:-1, 0] = fiber_col
    Om[..., 0, 1:-1] = -Gd[0] * e * fiber_col
    # omega_{n+1,0} = -sigma0 (eps eps_{n+1} / (c a)) T_{n+1} eta
    corner = -s.e0_sign * (s.eps * s.eps_normal / (s.c * a.value))[..., None] * data.T_np1[..., None] * eta
    Om[..., -1, 0] = corner
    Om[..., 0, -1] = -Gd[0] * Gd[-1] * corner

    X = build_X(data, omega, T_ext)
    return FrameFormBundle(Om, X, Om - X, omega, T_ext, s, data.grid)


def t_omega_identity(bundle: FrameFormBundle) -> float:
    """max |sum_g T_g omega_{g0}| over nodes and directions."""
    val = np.einsum("...g,...dg->...d", bundle.T_ext, bundle.Omega[..., :, 0])
    return float(np.max(np.abs(val)))


@dataclass
class FlatnessReport:
    field: np.ndarray  # per-node max-abs entry of dU + U^U
    entries: np.ndarray  # N + (pairs, m, m) raw residual
    max: float
    mean: float
    argmax: tuple
    first_structure: float | None = None
    first_field: np.ndarray | None = None  # per-node max-abs entry of d(omega) + Omega^omega

    def per_entry_max(self) -> np.ndarray:
        return np.max(np.abs(self.entries), axis=tuple(range(self.entries.ndim - 2)))


def curvature_of(form, grid: ChartGrid):
    """dU + U^U on coordinate pairs."""
    return chart.exterior_d(form, grid) + chart.wedge(form, form, grid.dim)


def flatness_residual(upsilon, grid: ChartGrid, bundle: FrameFormBundle | None = None,
                      margin: int = chart.MARGIN) -> FlatnessReport:
    """Residual of dU + U^U = 0, plus d(omega) + Omega^omega = 0 when a bundle is given."""
    entries = curvature_of(upsilon, grid)
    field = np.max(np.abs(entries), axis=(-3, -2, -1))
    inner = field[grid.interior(margin)]
    loc = np.unravel_index(int(np.argmax(inner)), inner.shape)
    first = first_field = None
    if bundle is not None:
        d_omega = chart.exterior_d(bundle.omega, grid)
        wedge = chart.wedge(bundle.Omega, bundle.omega, grid.dim)
        first_field = np.max(np.abs(d_omega + wedge), axis=(-2, -1))
        first = float(np.max(first_field[grid.interior(margin)]))
    return FlatnessReport(
        field,
        entries[grid.interior(margin)],
        float(inner.max()),
        float(inner.mean()),
        tuple(int(i) + margin for i in loc),
        first,
        first_field,
    )
