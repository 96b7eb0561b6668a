"""Worked hypersurfaces with closed-form reference fields.

Every scenario is produced from an explicit immersion chi into the warped
product, written in slot coordinates ``(x_0, ..., x_n, t)`` with the flat
factor carrying the signs ``G_diag[:n+1]``. Metric, frame, T, T_{n+1}, pi and
the shape operator are then derived from chi with exact jets, so the
structure data never depends on the reference formulas it is tested against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .ambient import SignatureData, warp_christoffel
from .chart import ChartGrid
from .expr import Jet2, ScalarField1D
from .gridjet import GridJet
from .structure import HypersurfaceData

KINDS = ("graph-sphere", "helicoid-hyperbolic", "slice", "graph-sphere3")


@dataclass
class Scenario:
    data: HypersurfaceData
    B: np.ndarray  # N + (m, m), entries <Ebar_alpha, e_beta>
    chi: np.ndarray  # N + (m,), slot coordinates
    frame_ambient: np.ndarray  # N + (m, m), row beta = slot coordinates of e_beta
    forms: dict = field(default_factory=dict)  # name -> N + (dim, m, m)
    A_closed: np.ndarray | None = None
    coord_order: tuple = ()  # slot indices listed in the conventional coordinate order
    kind: str = ""
    params: dict = field(default_factory=dict)


def embedded_data(grid: ChartGrid, chi: list, normal: np.ndarray, signs: SignatureData,
                  warp: ScalarField1D, label: str = "", tol: float = 1e-10):
    """Structure data of the hypersurface ``chi`` with unit normal ``normal``.

    ``chi`` is a list of n+2 GridJets (slot coordinates, time last); the chart
    must be orthogonal for the induced metric. Returns (data, B, frame_ambient).
    """
    n = grid.dim
    m = n + 2
    if len(chi) != m:
        raise ValueError("chi needs n+2 slot coordinates")
    s_slot = np.asarray(signs.G_diag[:-1], dtype=float)
    t = chi[-1]
    a = warp.jet(t.value)
    a0, a1, a2 = (np.asarray(x) for x in a.astuple())
    J = np.stack([c.grad for c in chi], axis=-1)  # N + (n, m): J[..., a, K] = d_a chi^K
    H = np.stack([c.hess for c in chi], axis=-1)  # N + (n, n, m)
    gdiag = np.concatenate([a0[..., None] ** 2 * s_slot, np.full(a0.shape + (1,), float(signs.eps))], axis=-1)
    metric = np.einsum("...ak,...k,...bk->...ab", J, gdiag, J)
    # d_c of the slot metric diagonal: only spatial slots depend on t
    dgdiag = np.zeros(a0.shape + (n, m))
    dgdiag[..., :-1] = (2 * a0 * a1)[..., None, None] * t.grad[..., :, None] * s_slot
    metric_d = (
        np.einsum("...ck,...ak,...bk->...cab", dgdiag, J, J)
        + np.einsum("...k,...ack,...bk->...cab", gdiag, H, J)
        + np.einsum("...k,...ak,...bck->...cab", gdiag, J, H)
    )
    off = metric - np.einsum("...ii->...i", metric)[..., :, None] * np.eye(n)
    if np.max(np.abs(off)) > 1e-9 * max(1.0, np.max(np.abs(metric))):
        raise ValueError("chart is not orthogonal for the induced metric")
    diag = np.einsum("...ii->...i", metric)
    sgn = np.sign(diag)
    expected = np.asarray(signs.frame_signs, dtype=float)
    if np.any(sgn != expected):
        raise ValueError("induced metric signs do not match the declared frame signs")
    scale = 1.0 / np.sqrt(np.abs(diag))  # e_i = scale_i d_i
    frame = np.einsum("...i,ij->...ji", scale, np.eye(n))
    ddiag = np.einsum("...cii->...ci", metric_d)
    dscale = -0.5 * sgn[..., None, :] * ddiag / np.abs(diag)[..., None, :] ** 1.5
    frame_d = np.einsum("...ci,ki->...cki", dscale, np.eye(n))

    # ambient frame vectors, rows beta = 0..n+1
    tangent = scale[..., :, None] * J  # dchi(e_i)
    p = np.stack([c.value for c in chi[:-1]], axis=-1)
    e0 = np.concatenate([signs.e0_sign * p / (signs.c * a0[..., None]), np.zeros(a0.shape + (1,))], axis=-1)
    normal = np.asarray(normal, dtype=float)
    frame_ambient = np.concatenate([e0[..., None, :], tangent, normal[..., None, :]], axis=-2)
    ip = lambda X, Y: a0**2 * np.sum(s_slot * X[..., :-1] * Y[..., :-1], axis=-1) + signs.eps * X[..., -1] * Y[..., -1]
    gram = np.stack([np.stack([ip(frame_ambient[..., i, :], frame_ambient[..., j, :]) for j in range(m)], -1)
                     for i in range(m)], -2)
    err = np.max(np.abs(gram - signs.G))
    if err > tol:
        raise ValueError(f"ambient frame is not orthonormal with signs G (error {err:.3e})")

    # shape operator from the second fundamental form
    christ = warp_christoffel(J[..., :, None, :], J[..., None, :, :], Jet2(a0[..., None, None], a1[..., None, None], a2[..., None, None]), signs)
    acc = H + christ  # N + (n, n, m)
    II_coord = a0[..., None, None] ** 2 * np.sum(s_slot * acc[..., :-1] * normal[..., None, None, :-1], axis=-1) \
        + signs.eps * acc[..., -1] * normal[..., None, None, -1]
    II = scale[..., :, None] * scale[..., None, :] * II_coord  # II(e_i, e_j)
    A = expected[:, None] * II  # A_ij = eps_i II(e_j, e_i), II symmetric

    T = signs.eps * tangent[..., -1]
    T_np1 = signs.eps * normal[..., -1]
    data = HypersurfaceData(
        grid=grid,
        metric=metric,
        frame=frame,
        A=A,
        T=T,
        T_np1=T_np1,
        pi=t.value.copy(),
        signs=signs,
        warp=warp,
        metric_d=metric_d,
        frame_d=frame_d,
        rho=a0.copy(),
        rho_t=a1.copy(),
        rho_b=a2.copy(),
        label=label,
    )
    B = frame_matrix(frame_ambient, a0, signs)
    return data, B, frame_ambient


def frame_matrix(frame_ambient, a_value, signs: SignatureData):
    """B_{alpha beta} = <Ebar_alpha, e_beta> with Ebar_alpha = E_alpha / a, Ebar_{n+1} = d_t."""
    s = np.asarray(signs.G_diag[:-1], dtype=float)
    spatial = (np.asarray(a_value)[..., None, None] * s[None, :, None]
               * np.swapaxes(frame_ambient[..., :, :-1], -1, -2))
    timeish = signs.eps * frame_ambient[..., :, -1]
    return np.concatenate([spatial, timeish[..., None, :]], axis=-2)


def skew_form(upper: dict, G_diag, shape, dim: int):
    """Assemble a g-skew matrix 1-form from its (alpha < beta) entries.

    ``upper[(alpha, beta)]`` is a list of per-direction coefficient arrays.
    """
    m = len(G_diag)
    out = np.zeros(tuple(shape) + (dim, m, m))
    for (i, j), coefs in upper.items():
        for d, c in enumerate(coefs):
            out[..., d, i, j] = c
            out[..., d, j, i] = -G_diag[i] * G_diag[j] * np.asarray(c)
    return out


# Example 1: graph over the round sphere in -I x_t S^2


DEFAULT_H1 = "2 + 0.3*cos(u)"


def example1_grid(n: int = 200) -> ChartGrid:
    return ChartGrid((0.2, -math.pi / 2 + 0.1), (math.pi - 0.2, math.pi / 2 - 0.1), (n, n), ("u", "v"))


def make_example1(h: ScalarField1D | str = DEFAULT_H1, grid: ChartGrid | None = None,
                  warp: ScalarField1D | None = None) -> Scenario:
    """chi(u, v) = (cos u, sin u cos v, sin u sin v, h(u)) in -I x_t S^2."""
    if isinstance(h, str):
        h = ScalarField1D.from_source(h, "u")
    grid = grid or example1_grid()
    warp = warp or ScalarField1D.from_source("t", "t", (1e-3, 1e3))
    signs = SignatureData(n=2, k=0, c=1, eps=-1, eps_normal=-1, frame_signs=(1, 1))
    u = GridJet.coordinate(grid, 0)
    v = GridJet.coordinate(grid, 1)
    hj = h.jet(u.value)
    h0, h1, h2 = (np.asarray(x) for x in hj.astuple())
    if np.any(h0 <= np.abs(h1)):
        raise ValueError("h(u) > |h'(u)| fails on the grid")
    if np.any(np.sin(u.value) <= 0):
        raise ValueError("sin(u) must stay positive on the grid")
    H = u.compose(h)
    chi = [u.cos(), u.sin() * v.cos(), u.sin() * v.sin(), H]
    W = np.sqrt(h0**2 - h1**2)
    uu, vv = u.value, v.value
    pu = np.stack([-np.sin(uu), np.cos(uu) * np.cos(vv), np.cos(uu) * np.sin(vv)], axis=-1)
    normal = np.concatenate([h1[..., None] * pu, (h0**2)[..., None]], axis=-1) / (h0 * W)[..., None]
    data, B, fa = embedded_data(grid, chi, normal, signs, warp, "example1")
    chi_vals = np.stack([c.value for c in chi], axis=-1)
    forms = example1_forms(uu, h0, h1, h2, signs.G_diag, grid)
    A_closed = np.zeros(grid.shape + (2, 2))
    A_closed[..., 0, 0] = -(h0**2 - 2 * h1**2 + h0 * h2) / W**3
    A_closed[..., 1, 1] = -(h1 * np.cos(uu) + h0 * np.sin(uu)) / (W * h0 * np.sin(uu))
    return Scenario(data, B, chi_vals, fa, forms, A_closed, (0, 1, 2, 3), "graph-sphere",
                    {"h": h.source})


def example1_forms(u, h, h1, h2, G_diag, grid):
    W = np.sqrt(h**2 - h1**2)
    z = np.zeros_like(u)
    ups = {
        (0, 1): [-h / W, z],
        (0, 2): [z, -np.sin(u)],
        (0, 3): [-h1 / W, z],
        (1, 2): [z, -h * np.cos(u) / W],
        (1, 3): [(h * h2 - h1**2) / (h**2 - h1**2), z],
        (2, 3): [z, h1 * np.cos(u) / W],
    }
    X = {
        (1, 2): [z, -np.sin(u) * h1 / W],
        (1, 3): [1.0 + z, z],
        (2, 3): [z, np.sin(u) * h / W],
    }
    om = {
        (0, 1): [-h / W, z],
        (0, 2): [z, -np.sin(u)],
        (0, 3): [-h1 / W, z],
        (1, 2): [z, -(h * np.cos(u) + h1 * np.sin(u)) / W],
        (1, 3): [(h**2 - 2 * h1**2 + h * h2) / (h**2 - h1**2), z],
        (2, 3): [z, (h1 * np.cos(u) + h * np.sin(u)) / W],
    }
    return {
        "Upsilon": skew_form(ups, G_diag, grid.shape, 2),
        "X": skew_form(X, G_diag, grid.shape, 2),
        "Omega": skew_form(om, G_diag, grid.shape, 2),
    }


# Example 2: helicoidal surface in I x_a H^2


DEFAULT_A2 = "cosh(t)"
DEFAULT_H2 = "v"


def example2_grid(n: int = 200) -> ChartGrid:
    return ChartGrid((0.5, -1.0), (2.0, 1.0), (n, n), ("u", "v"))


def make_example2(a: ScalarField1D | str = DEFAULT_A2, h: ScalarField1D | str = DEFAULT_H2,
                  c_const: float = 1.0, grid: ChartGrid | None = None) -> Scenario:
    """chi(u, v) = (u cos(c v), u sin(c v), sqrt(1+u^2), h(v)) in I x_a H^2.

    Slots are ordered (z, y, x, t) so that slot 0 is the timelike direction of
    the Lorentzian factor; ``coord_order`` maps back to (x, y, z, t).
    """
    if isinstance(a, str):
        a = ScalarField1D.from_source(a, "t", (-50.0, 50.0))
    if isinstance(h, str):
        h = ScalarField1D.from_source(h, "v")
    grid = grid or example2_grid()
    k = float(c_const)
    if k == 0:
        raise ValueError("helicoid constant must be nonzero")
    signs = SignatureData(n=2, k=0, c=-1, eps=1, eps_normal=1, frame_signs=(1, 1), e0_sign=-1)
    u = GridJet.coordinate(grid, 0)
    v = GridJet.coordinate(grid, 1)
    hj = h.jet(v.value)
    h0, h1, h2 = (np.asarray(x) for x in hj.astuple())
    if np.any(h1 <= 0):
        raise ValueError("h'(v) > 0 fails on the grid")
    H = v.compose(h)
    kv = v * k
    chi = [(u * u + 1.0).sqrt(), u * kv.sin(), u * kv.cos(), H]
    aj = a.jet(h0)
    A0, A1 = np.asarray(aj.value), np.asarray(aj.d1)
    uu, vv = u.value, v.value
    W = np.sqrt(k**2 * uu**2 * A0**2 + h1**2)
    normal = np.stack([np.zeros_like(uu), -np.cos(k * vv) * h1, np.sin(k * vv) * h1, k * uu * A0**2],
                      axis=-1) / (A0 * W)[..., None]
    data, B, fa = embedded_data(grid, chi, normal, signs, a, "example2")
    chi_vals = np.stack([c.value for c in chi], axis=-1)
    forms = example2_forms(uu, k, A0, A1, h1, h2, signs.G_diag, grid)
    # A from the Omega matrix: A_ik = -omega_{i3}(e_k)
    R = np.sqrt(1 + uu**2)
    om = forms["Omega"]
    e1u = R / A0  # e_1 = (R/a) d_u
    e2v = 1.0 / W  # e_2 = d_v / W
    A_closed = np.zeros(grid.shape + (2, 2))
    A_closed[..., 0, 0] = -om[..., 0, 1, 3] * e1u
    A_closed[..., 0, 1] = -om[..., 1, 1, 3] * e2v
    A_closed[..., 1, 0] = -om[..., 0, 2, 3] * e1u
    A_closed[..., 1, 1] = -om[..., 1, 2, 3] * e2v
    return Scenario(data, B, chi_vals, fa, forms, A_closed, (2, 1, 0, 3), "helicoid-hyperbolic",
                    {"a": a.source, "h": h.source, "c_const": k})


def example2_forms(u, k, a, a1, h1, h2, G_diag, grid):
    R = np.sqrt(1 + u**2)
    W2 = k**2 * u**2 * a**2 + h1**2
    W = np.sqrt(W2)
    z = np.zeros_like(u)
    # h'' enters through d/dv of h'(v); a' is a'(h(v))
    ups = {
        (0, 1): [1 / R, z],
        (0, 2): [z, k**2 * u**2 * a / W],
        (0, 3): [z, -k * u * h1 / W],
        (1, 2): [z, -k**2 * u * R * a / W],
        (1, 3): [z, k * R * h1 / W],
        (2, 3): [k * a * h1 / W2, k * u * (a1 * h1**2 - a * h2) / W2],
    }
    X = {
        (1, 2): [a1 * h1 / (R * W), z],
        (1, 3): [k * u * a * a1 / (R * W), z],
        (2, 3): [z, k * u * a1],
    }
    om = {
        (0, 1): [1 / R, z],
        (0, 2): [z, k**2 * u**2 * a / W],
        (0, 3): [z, -k * u * h1 / W],
        (1, 2): [a1 * h1 / (R * W), -k**2 * (u + u**3) * a / (R * W)],
        (1, 3): [k * u * a * a1 / (R * W), k * (1 + u**2) * h1 / (R * W)],
        (2, 3): [k * a * h1 / W2, k * u * (a1 * (k**2 * u**2 * a**2 + 2 * h1**2) - a * h2) / W2],
    }
    return {
        "Upsilon": skew_form(ups, G_diag, grid.shape, 2),
        "X": skew_form(X, G_diag, grid.shape, 2),
        "Omega": skew_form(om, G_diag, grid.shape, 2),
    }


# slices {t0} x M^2(c)


def slice_grid(fiber: str = "sphere", n: int = 200) -> ChartGrid:
    if fiber == "sphere":
        return example1_grid(n)
    return ChartGrid((0.2, -math.pi / 2 + 0.1), (1.5, math.pi / 2 - 0.1), (n, n), ("u", "v"))


def make_slice(t0: float = 2.0, a: ScalarField1D | str = "t", fiber: str = "sphere",
               grid: ChartGrid | None = None, eps: int = -1, flip_normal: bool = False) -> Scenario:
    """The slice {t0} x M^2(c) with normal -+d_t.

    By default T_{n+1} = eps*eps_{n+1} (normal eps_{n+1} d_t). Condition (C)
    with T = 0 then forces A = -(a'/a) / (eps_{n+1} T_{n+1}) Id = -eps (a'/a) Id.
    ``flip_normal`` reverses the normal, which flips the signs of T_{n+1} and A.
    """
    if isinstance(a, str):
        a = ScalarField1D.from_source(a, "t", (1e-3, 1e3))
    if fiber not in ("sphere", "hyperbolic"):
        raise ValueError("fiber must be 'sphere' or 'hyperbolic'")
    grid = grid or slice_grid(fiber)
    c = 1 if fiber == "sphere" else -1
    signs = SignatureData(n=2, k=0, c=c, eps=eps, eps_normal=eps, frame_signs=(1, 1))
    u = GridJet.coordinate(grid, 0)
    v = GridJet.coordinate(grid, 1)
    if fiber == "sphere":
        chi = [u.cos(), u.sin() * v.cos(), u.sin() * v.sin()]
    else:
        chi = [u.cosh(), u.sinh() * v.cos(), u.sinh() * v.sin()]
    chi.append(GridJet.constant(grid, t0))
    s = signs.eps_normal * (-1 if flip_normal else 1)
    normal = np.zeros(grid.shape + (4,))
    normal[..., -1] = s
    data, B, fa = embedded_data(grid, chi, normal, signs, a, "slice")
    chi_vals = np.stack([c_.value for c_ in chi], axis=-1)
    return Scenario(data, B, chi_vals, fa, {}, None, (0, 1, 2, 3), "slice",
                    {"t0": t0, "a": a.source, "fiber": fiber, "eps": eps, "flip_normal": flip_normal})


# graph over S^3 in -I x_t S^3 (chart dimension 3)


def graph_sphere3_grid(n: int = 40) -> ChartGrid:
    return ChartGrid((0.2, 0.3, -math.pi / 2 + 0.1), (math.pi - 0.2, math.pi - 0.3, math.pi / 2 - 0.1),
                     (n, n, n), ("u", "v", "w"))


def make_graph_sphere3(h: ScalarField1D | str = DEFAULT_H1, grid: ChartGrid | None = None,
                       warp: ScalarField1D | None = None) -> Scenario:
    """chi = (cos u, sin u cos v, sin u sin v cos w, sin u sin v sin w, h(u)) in -I x_t S^3."""
    if isinstance(h, str):
        h = ScalarField1D.from_source(h, "u")
    grid = grid or graph_sphere3_grid()
    warp = warp or ScalarField1D.from_source("t", "t", (1e-3, 1e3))
    signs = SignatureData(n=3, k=0, c=1, eps=-1, eps_normal=-1, frame_signs=(1, 1, 1))
    u, v, w = (GridJet.coordinate(grid, i) for i in range(3))
    hj = h.jet(u.value)
    h0, h1 = np.asarray(hj.value), np.asarray(hj.d1)
    if np.any(h0 <= np.abs(h1)):
        raise ValueError("h(u) > |h'(u)| fails on the grid")
    su = u.sin()
    chi = [u.cos(), su * v.cos(), su * v.sin() * w.cos(), su * v.sin() * w.sin(), u.compose(h)]
    uu, vv, ww = u.value, v.value, w.value
    pu = np.stack([-np.sin(uu), np.cos(uu) * np.cos(vv), np.cos(uu) * np.sin(vv) * np.cos(ww),
                   np.cos(uu) * np.sin(vv) * np.sin(ww)], axis=-1)
    W = np.sqrt(h0**2 - h1**2)
    normal = np.concatenate([h1[..., None] * pu, (h0**2)[..., None]], axis=-1) / (h0 * W)[..., None]
    data, B, fa = embedded_data(grid, chi, normal, signs, warp, "graph-sphere3")
    chi_vals = np.stack([c.value for c in chi], axis=-1)
    return Scenario(data, B, chi_vals, fa, {}, None, (0, 1, 2, 3, 4), "graph-sphere3", {"h": h.source})


def build(kind: str, params: dict | None = None, grid: ChartGrid | None = None) -> Scenario:
    """Dispatch by scenario kind (also accepts the names example1/example2)."""
    params = dict(params or {})
    if kind in ("example1", "graph-sphere"):
        return make_example1(params.get("h", DEFAULT_H1), grid)
    if kind in ("example2", "helicoid-hyperbolic"):
        return make_example2(params.get("a", DEFAULT_A2), params.get("h", DEFAULT_H2),
                             params.get("c_const", 1.0), grid)
    if kind == "slice":
        return make_slice(params.get("t0", 2.0), params.get("a", "t"), params.get("fiber", "sphere"), grid,
                          params.get("eps", -1), params.get("flip_normal", False))
    if kind == "graph-sphere3":
        return make_graph_sphere3(params.get("h", DEFAULT_H1), grid)
    raise ValueError(f"unknown scenario {kind!r}")
