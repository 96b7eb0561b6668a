"""Mean-curvature norm of pi-level leaves for hypersurfaces of 4-dimensional
Robertson-Walker spacetimes (n = 3, eps = -1).

A leaf is a level set of pi inside M: a 2-surface with normal bundle spanned
by T and the hypersurface normal. Its mean curvature vector H satisfies

    4 <H, H> = (2 a'/a + eps4 T4 h)^2 / <T, T> + eps4 h^2

with h = trace(A) - <AT, T>/<T, T>. Using <T,T> + eps4 T4^2 = -1 the zero set
of the right-hand side is the quadratic h^2 - 4 (a'/a) T4 h - 4 eps4 (a'/a)^2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .structure import HypersurfaceData, pi_bins


def inner_TT(T, frame_signs):
    return np.sum(np.asarray(frame_signs) * T * T, axis=-1)


def inner_AT_T(A, T, frame_signs):
    """<AT, T> with A[..., i, k] the frame matrix of A and T_i = <T, e_i>."""
    v = np.asarray(frame_signs) * T  # frame components of T
    return np.einsum("...i,...ik,...k->...", T, A, v)


def mean_h(A, T, frame_signs, tau_deg: float = 1e-8):
    """trace(A) - <AT,T>/<T,T>; NaN where |<T,T>| < tau_deg."""
    tt = inner_TT(T, frame_signs)
    bad = np.abs(tt) < tau_deg
    safe = np.where(bad, 1.0, tt)
    h = np.trace(A, axis1=-2, axis2=-1) - inner_AT_T(A, T, frame_signs) / safe
    return np.where(bad, np.nan, h)


def h_squared_closed(h, rate, T4, eps4, TT):
    """<H, H> from the closed form; ``rate`` is a'/a evaluated on the leaf."""
    return 0.25 * ((2.0 * rate + eps4 * T4 * h) ** 2 / TT + eps4 * h**2)


def null_roots(rate, T4, eps4):
    """The two values of h making H null: 2 r T4 +/- 2 |r| sqrt(T4^2 + eps4)."""
    disc = np.sqrt(np.asarray(T4) ** 2 + eps4)
    base = 2.0 * rate * T4
    return base + 2.0 * np.abs(rate) * disc, base - 2.0 * np.abs(rate) * disc


def closed_form_roots(a_prime, a_value, T4, TT, literal: bool = False):
    """Closed-form roots in the form 2 r T4 +/- 2 eps_T |a'/a| sqrt|<T,T>|.

    With ``literal`` the first term uses a' instead of a'/a; kept only to show
    that this reading disagrees with the quadratic when a != 1.
    """
    rate = a_prime / a_value
    first = 2.0 * (a_prime if literal else rate) * T4
    second = 2.0 * np.sign(TT) * np.abs(rate) * np.sqrt(np.abs(TT))
    return first + second, first - second


def _require_rw(data: HypersurfaceData):
    s = data.signs
    if s.n != 3 or s.eps != -1:
        raise ValueError("horizon analysis needs n = 3 and eps = -1")


def H_squared(data: HypersurfaceData, tau_deg: float = 1e-8):
    """Per-node (h, <H,H>) with NaN on degenerate nodes."""
    _require_rw(data)
    s = data.signs
    e = data.eps_frame
    a = data.warp_jet()
    tt = inner_TT(data.T, e)
    h = mean_h(data.A, data.T, e, tau_deg)
    with np.errstate(invalid="ignore", divide="ignore"):
        hsq = h_squared_closed(h, a.d1 / a.value, data.T_np1, s.eps_normal, np.where(np.isnan(h), np.nan, tt))
    return h, hsq


@dataclass
class LeafPointReport:
    node: tuple
    h: float | None
    Hsq: float | None
    null_mean_curvature: bool
    branch: int  # +1 or -1: nearer root, 0 when masked
    mask: bool
    spacelike: bool


@dataclass
class LeafVerdict:
    label: int
    t: float  # bin center on pi
    nodes: int
    masked: int
    max_abs_Hsq: float | None
    Hsq_min: float | None
    Hsq_max: float | None
    verdict: str  # null_mean_curvature | not_null | indeterminate


@dataclass
class HorizonScan:
    h: np.ndarray
    Hsq: np.ndarray
    null: np.ndarray
    branch: np.ndarray
    mask: np.ndarray
    spacelike: np.ndarray
    sign_ok: np.ndarray  # eps4 * sign(<T,T>) == -1
    leaves: list
    tau_trap: float

    def point(self, node) -> LeafPointReport:
        node = tuple(node)
        m = bool(self.mask[node])
        return LeafPointReport(
            node,
            None if m else float(self.h[node]),
            None if m else float(self.Hsq[node]),
            bool(self.null[node]),
            int(self.branch[node]),
            m,
            bool(self.spacelike[node]),
        )

    def flagged(self) -> list:
        return [lf for lf in self.leaves if lf.verdict == "null_mean_curvature"]


def trapped_scan(data: HypersurfaceData, tau_trap: float = 1e-6, tau_deg: float = 1e-8) -> HorizonScan:
    """Evaluate <H,H> per node and aggregate a verdict per pi-level bin."""
    _require_rw(data)
    s = data.signs
    e = data.eps_frame
    a = data.warp_jet()
    rate = a.d1 / a.value
    tt = inner_TT(data.T, e)
    h, hsq = H_squared(data, tau_deg)

    # the leaf T-perp is spacelike iff the metric index of M is carried by T alone
    index_M = int(np.sum(e < 0))
    spacelike = (tt < 0) if index_M == 1 else (tt > 0) if index_M == 0 else np.zeros(tt.shape, bool)
    sign_ok = s.eps_normal * np.sign(tt) == -1
    mask = np.isnan(h) | ~spacelike | ~sign_ok

    rp, rm = null_roots(rate, data.T_np1, s.eps_normal)
    with np.errstate(invalid="ignore"):
        branch = np.where(np.abs(h - rp) <= np.abs(h - rm), 1, -1)
        null = ~mask & (np.abs(hsq) <= tau_trap)
    branch = np.where(mask, 0, branch)

    bins = pi_bins(data)
    leaves = []
    for label in np.unique(bins.labels):
        sel = bins.labels == label
        ok = sel & ~mask
        vals = hsq[ok]
        if vals.size and np.any(np.abs(vals) > tau_trap):
            verdict = "not_null"
        elif np.any(sel & mask) or not vals.size:
            verdict = "indeterminate"
        else:
            verdict = "null_mean_curvature"
        leaves.append(LeafVerdict(
            int(label),
            float(bins.center(label)),
            int(sel.sum()),
            int((sel & mask).sum()),
            float(np.max(np.abs(vals))) if vals.size else None,
            float(vals.min()) if vals.size else None,
            float(vals.max()) if vals.size else None,
            verdict,
        ))
    return HorizonScan(h, hsq, null, branch, mask, spacelike, sign_ok, leaves, tau_trap)


def null_crossings(scan: HorizonScan) -> list:
    """pi values where the per-leaf median of <H,H> changes sign (linear interpolation)."""
    ts, vals = [], []
    for lf in scan.leaves:
        if lf.Hsq_min is None:
            continue
        ts.append(lf.t)
        vals.append(0.5 * (lf.Hsq_min + lf.Hsq_max))
    out = []
    for (t0, v0), (t1, v1) in zip(zip(ts, vals), zip(ts[1:], vals[1:])):
        if v0 == 0.0:
            out.append(t0)
        elif v0 * v1 < 0:
            out.append(t0 + (t1 - t0) * v0 / (v0 - v1))
    return out
