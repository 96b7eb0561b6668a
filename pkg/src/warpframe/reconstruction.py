"""Integrate B^{-1} dB = Upsilon on a grid and rebuild the immersion.

Frames are (n+2)x(n+2) matrices with B[alpha, beta] = <E_alpha, e_beta>, where
E_alpha is the ambient unit frame (fiber directions first, d_t last) and
e_beta the adapted frame (e0, e_1..e_n, normal). Admissible frames satisfy
B^T G B = G and carry (T_0, ..., T_{n+1}) as their last row.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import chart
from .ambient import SignatureData, warp_christoffel
from .chart import ChartGrid
from .frames import FrameFormBundle
from .structure import HypersurfaceData, Residual, pi_bins, residual


class ReconstructionError(RuntimeError):
    pass


def expm(M):
    """Matrix exponential by scaling and squaring of a truncated Taylor series.

    Works on stacks ``M[..., m, m]``. Intended for the small matrices used here.
    """
    M = np.asarray(M, dtype=float)
    if not np.all(np.isfinite(M)):
        raise ReconstructionError("non-finite matrix passed to expm")
    norm = float(np.max(np.sum(np.abs(M), axis=-1))) if M.size else 0.0
    s = max(0, int(math.ceil(math.log2(norm / 0.5)))) if norm > 0.5 else 0
    X = M / 2.0**s
    eye = np.broadcast_to(np.eye(M.shape[-1]), M.shape)
    out = eye.copy()
    term = eye.copy()
    for k in range(1, 40):
        term = term @ X / k
        out = out + term
        if np.max(np.abs(term)) < 1e-17:
            break
    for _ in range(s):
        out = out @ out
    return out


def group_error(B, G_diag):
    """max |B^T G B - G| per stacked matrix."""
    Gd = np.asarray(G_diag, dtype=float)
    gram = np.einsum("...ka,k,...kb->...ab", B, Gd, B)
    return np.max(np.abs(gram - np.diag(Gd)), axis=(-2, -1))


def g_project(B, G_diag, pinned_row=None):
    """G-Gram-Schmidt on the rows of B, optionally replacing the last row first.

    Rows are processed as (last, 0, 1, ..., n); each is made G-orthogonal to the
    earlier ones and rescaled to unit G-norm. The last row is kept exactly.
    """
    Gd = np.asarray(G_diag, dtype=float)
    B = np.array(B, dtype=float, copy=True)
    if pinned_row is not None:
        B[..., -1, :] = pinned_row
    done = [B[..., -1, :]]
    signs = [Gd[-1]]
    for r in range(B.shape[-2] - 1):
        v = B[..., r, :]
        for w, sw in zip(done, signs):
            v = v - (np.sum(v * Gd * w, axis=-1) / sw)[..., None] * w
        q = np.sum(v * Gd * v, axis=-1)
        if np.any(np.abs(q) < 1e-12) or np.any(np.sign(q) != Gd[r]):
            raise ReconstructionError("frame row lost its causal character during re-projection")
        v = v / np.sqrt(np.abs(q))[..., None]
        B[..., r, :] = v
        done.append(v)
        signs.append(Gd[r])
    return B


def initial_frame(T_row, G_diag, seeds=None, skip_tol: float = 1e-8, row_tol: float = 1e-8):
    """An element of the group whose last row is ``T_row``.

    The remaining rows come from G-Gram-Schmidt over ``seeds`` (standard basis by
    default), each accepted vector filling the first free slot of matching sign.
    Column 0 is negated at the end if needed for det = +1.
    """
    Gd = np.asarray(G_diag, dtype=float)
    m = len(Gd)
    T_row = np.asarray(T_row, dtype=float)
    q = float(np.sum(Gd * T_row * T_row))
    if abs(q - Gd[-1]) > row_tol:
        raise ValueError(f"last-row constraint violated: G-norm {q:.3e} != {Gd[-1]:+.0f}")
    seeds = np.eye(m) if seeds is None else np.asarray(seeds, dtype=float)
    rows: dict = {}
    accepted = [(T_row, Gd[-1])]
    for seed in seeds:
        v = seed.astype(float)
        for w, sw in accepted:
            v = v - (np.sum(v * Gd * w) / sw) * w
        q = float(np.sum(v * Gd * v))
        if abs(q) < skip_tol:
            continue
        sign = 1.0 if q > 0 else -1.0
        slot = next((r for r in range(m - 1) if r not in rows and Gd[r] == sign), None)
        if slot is None:
            continue
        v = v / math.sqrt(abs(q))
        rows[slot] = v
        accepted.append((v, sign))
        if len(rows) == m - 1:
            break
    if len(rows) != m - 1:
        raise ReconstructionError("could not complete the frame from the given seeds")
    B = np.vstack([rows[r] for r in range(m - 1)] + [T_row])
    if np.linalg.det(B) < 0:
        B[:, 0] *= -1.0
    return B


def check_frame(B, T_row, G_diag, tol: float = 1e-8) -> dict:
    """Validate a user-supplied initial frame; det is reported, not enforced."""
    B = np.asarray(B, dtype=float)
    Gd = np.asarray(G_diag, dtype=float)
    if B.shape != (len(Gd), len(Gd)):
        raise ValueError(f"initial frame must be {len(Gd)}x{len(Gd)}")
    grp = float(group_error(B, Gd))
    row = float(np.max(np.abs(B[-1] - np.asarray(T_row))))
    if grp > tol:
        raise ValueError(f"initial frame does not preserve G (error {grp:.3e})")
    if row > tol:
        raise ValueError(f"initial frame last row differs from T by {row:.3e}")
    return {"group_error": grp, "row_error": row, "det": float(np.linalg.det(B))}


@dataclass
class DriftLog:
    group: list = field(default_factory=list)  # pre-projection max |B^T G B - G|
    pin: list = field(default_factory=list)  # pre-projection max |B_last - T|

    def add(self, B, T_row, G_diag, limit):
        g = float(np.max(group_error(B, G_diag)))
        p = float(np.max(np.abs(B[..., -1, :] - T_row)))
        self.group.append(g)
        self.pin.append(p)
        if g > limit:
            raise ReconstructionError(f"group drift {g:.3e} exceeds {limit:.1e}; input is not flat")

    @property
    def max_group(self) -> float:
        return max(self.group, default=0.0)

    @property
    def max_pin(self) -> float:
        return max(self.pin, default=0.0)


def _check_finite(U):
    if not np.all(np.isfinite(U)):
        raise ReconstructionError("non-finite connection form sample")


def _step(B, U_from, U_to, delta):
    return B @ expm(0.5 * (U_from + U_to) * delta)


def staircase_path(start, end, axis_order) -> list:
    """Grid-adjacent node chain from start to end, moving along axes in the given order."""
    node = list(start)
    path = [tuple(node)]
    for ax in axis_order:
        step = 1 if end[ax] >= node[ax] else -1
        while node[ax] != end[ax]:
            node[ax] += step
            path.append(tuple(node))
    return path


def integrate_frame(bundle: FrameFormBundle, B0, path, interval: int = 16,
                    drift_limit: float = 1e-3, log: DriftLog | None = None):
    """Transport B0 along a chain of adjacent nodes; returns the frame at the end."""
    U = bundle.Upsilon
    spacing = bundle.grid.spacing
    Gd = bundle.signs.G_diag
    log = DriftLog() if log is None else log
    B = np.asarray(B0, dtype=float)
    for k, (p, q) in enumerate(zip(path[:-1], path[1:]), start=1):
        diff = np.subtract(q, p)
        if np.sum(np.abs(diff)) != 1:
            raise ValueError(f"nodes {p} and {q} are not grid neighbours")
        ax = int(np.flatnonzero(diff)[0])
        Up, Uq = U[p][ax], U[q][ax]
        _check_finite(Up)
        _check_finite(Uq)
        B = _step(B, Up, Uq, diff[ax] * spacing[ax])
        if k % interval == 0:
            log.add(B, bundle.T_ext[q], Gd, drift_limit)
            B = g_project(B, Gd, bundle.T_ext[q])
    return B


@dataclass
class FrameField:
    B: np.ndarray  # N + (m, m)
    origin: tuple
    drift: DriftLog
    group_error: np.ndarray  # final |B^T G B - G| per node
    pin_error: np.ndarray  # final |B_last - T| per node


def integrate_field(bundle: FrameFormBundle, B0, origin=None, interval: int = 16,
                    drift_limit: float = 1e-3) -> FrameField:
    """Fill the grid by sweeping axis 0 through the origin, then axis 1, then axis 2."""
    grid = bundle.grid
    U = bundle.Upsilon
    _check_finite(U)
    Gd = bundle.signs.G_diag
    m = U.shape[-1]
    origin = tuple(c // 2 for c in grid.counts) if origin is None else tuple(int(i) for i in origin)
    B = np.full(grid.shape + (m, m), np.nan)
    B[origin] = np.asarray(B0, dtype=float)
    log = DriftLog()
    for ax in range(grid.dim):
        h = grid.spacing[ax]

        def at(j, ax=ax):
            return tuple([slice(None)] * ax + [j] + list(origin[ax + 1:]))

        for step, stop in ((1, grid.counts[ax] - 1), (-1, 0)):
            j = origin[ax]
            k = 0
            while j != stop:
                src, dst = at(j), at(j + step)
                B[dst] = _step(B[src], U[src][..., ax, :, :], U[dst][..., ax, :, :], step * h)
                k += 1
                j += step
                if k % interval == 0:
                    log.add(B[dst], bundle.T_ext[dst], Gd, drift_limit)
                    B[dst] = g_project(B[dst], Gd, bundle.T_ext[dst])
    return FrameField(
        B,
        origin,
        log,
        group_error(B, Gd),
        np.max(np.abs(B[..., -1, :] - bundle.T_ext), axis=-1),
    )


@dataclass
class ImmersionSample:
    chi: np.ndarray  # N + (n+2,) in slots (x_0..x_n, t)
    normal: np.ndarray  # N + (n+2,)
    B: np.ndarray
    quadric: np.ndarray  # sum eps_a chi_a^2 - c per node
    grid: ChartGrid


def build_chi(B, data: HypersurfaceData) -> ImmersionSample:
    """chi_a = e0_sign * c * eps_a * B[a, 0] for fiber slots and chi_{n+1} = pi."""
    s = data.signs
    Gd = np.asarray(s.G_diag, dtype=float)
    B = np.asarray(B, dtype=float)
    chi = np.empty(B.shape[:-1])
    chi[..., :-1] = s.e0_sign * s.c * Gd[:-1] * B[..., :-1, 0]
    chi[..., -1] = data.pi
    a = data.warp_jet().value
    normal = np.empty_like(chi)
    normal[..., :-1] = Gd[:-1] * B[..., :-1, -1] / a[..., None]
    normal[..., -1] = Gd[-1] * B[..., -1, -1]
    quad = np.sum(Gd[:-1] * chi[..., :-1] ** 2, axis=-1) - s.c
    return ImmersionSample(chi, normal, B, quad, data.grid)


def ambient_inner(X, Y, a_value, signs: SignatureData):
    s = np.asarray(signs.G_diag[:-1], dtype=float)
    return (a_value**2 * np.sum(s * X[..., :-1] * Y[..., :-1], axis=-1)
            + signs.eps * X[..., -1] * Y[..., -1])


@dataclass
class ImmersionReport:
    isometry: Residual
    dt_decomposition: Residual
    shape_operator: Residual
    pi_identity: Residual
    quadric: Residual
    normal: Residual  # unit length and orthogonality of the rebuilt normal

    def residuals(self) -> list:
        return [self.isometry, self.dt_decomposition, self.shape_operator,
                self.pi_identity, self.quadric, self.normal]


def verify_immersion(sample: ImmersionSample, data: HypersurfaceData, order: int = 2,
                     margin: int = chart.MARGIN) -> ImmersionReport:
    """Finite-difference checks that chi is an isometric immersion with the given data."""
    grid = data.grid
    s = data.signs
    n = grid.dim
    chi = sample.chi
    a = data.warp_jet()
    aval = a.value
    F = data.frame  # [..., k, i]
    e = data.eps_frame

    dchi = chart.gradient(chi, grid, order)  # [..., d, slot]
    push = np.einsum("...ki,...ks->...is", F, dchi)  # dchi(e_i)

    gram = np.stack([np.stack([ambient_inner(push[..., i, :], push[..., j, :], aval, s)
                               for j in range(n)], axis=-1) for i in range(n)], axis=-2)
    iso = np.max(np.abs(gram - np.diag(e)), axis=(-2, -1))

    # the decomposition defect is measured through its inner products with the
    # rebuilt adapted frame (e0, dchi(e_i), normal), which ambient isometries preserve
    dt = np.zeros(chi.shape)
    dt[..., -1] = 1.0
    T_amb = np.einsum("...i,...is->...s", e * data.T, push)
    defect = dt - T_amb - s.eps_normal * data.T_np1[..., None] * sample.normal
    e0 = np.zeros(chi.shape)
    e0[..., :-1] = s.e0_sign * chi[..., :-1] / (s.c * aval[..., None])
    adapted = [e0, *(push[..., i, :] for i in range(n)), sample.normal]
    dec = np.max(np.abs(np.stack([ambient_inner(defect, f, aval, s) for f in adapted], axis=-1)), axis=-1)

    # second partials [..., a, b, slot]
    hess = np.stack([chart.gradient(dchi[..., d, :], grid, order) for d in range(n)], axis=-3)
    gamma = np.stack([np.stack([warp_christoffel(dchi[..., p, :], dchi[..., q, :], a, s)
                                for q in range(n)], axis=-2) for p in range(n)], axis=-3)
    cov = hess + gamma
    nn = np.stack([np.stack([ambient_inner(cov[..., p, q, :], sample.normal, aval, s)
                             for q in range(n)], axis=-1) for p in range(n)], axis=-2)
    second = np.einsum("...pi,...qj,...pq->...ij", F, F, nn)
    target = np.swapaxes(data.A, -1, -2) * e[None, :]  # <e_j, A e_i> = eps_j A_ji
    shape = np.max(np.abs(second - target), axis=(-2, -1))

    pi_id = np.abs(chi[..., -1] - data.pi)

    nrm = ambient_inner(sample.normal, sample.normal, aval, s) - s.eps_normal
    orth = np.stack([ambient_inner(push[..., i, :], sample.normal, aval, s) for i in range(n)], axis=-1)
    normal = np.maximum(np.abs(nrm), np.max(np.abs(orth), axis=-1))

    return ImmersionReport(
        residual("isometry", iso, grid, margin),
        residual("dt_decomposition", dec, grid, margin),
        residual("shape_operator", shape, grid, margin),
        residual("pi_identity", pi_id, grid, 0),
        residual("quadric", np.abs(sample.quadric), grid, 0),
        residual("normal", normal, grid, margin),
    )


@dataclass
class LeafStructure:
    kind: str  # "slice", "foliated" or "mixed"
    vanishing: np.ndarray  # bool per node
    labels: np.ndarray | None  # pi-bin label per node when foliated


def eta_vanishing_mask(data: HypersurfaceData, tau: float = 1e-8) -> np.ndarray:
    """Nodes where every T_i is within tau plus one cell's worth of its own variation."""
    dT = chart.gradient(data.T, data.grid)  # [..., d, i]
    slack = np.einsum("...di,d->...i", np.abs(dT), np.asarray(data.grid.spacing))
    return np.all(np.abs(data.T) <= tau + slack, axis=-1)


def leaf_structure(data: HypersurfaceData, tau: float = 1e-8) -> LeafStructure:
    mask = eta_vanishing_mask(data, tau)
    if mask.all():
        return LeafStructure("slice", mask, None)
    if not mask.any():
        return LeafStructure("foliated", mask, pi_bins(data).labels)
    return LeafStructure("mixed", mask, None)
