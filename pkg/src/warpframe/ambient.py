"""Closed-form geometry of the warped products eps*I x_a E^{n+1} and eps*I x_a M^n_k(c).

Ambient vectors are (n+2)-arrays in slot layout ``(E_0, ..., E_n, d_t)`` where
``E_alpha`` is the parallel frame of the flat factor with ``g0(E_a, E_b) =
eps_a delta_ab``. At time ``t`` the metric on these slots is
``diag(a^2 eps_0, ..., a^2 eps_n, eps)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .expr import Jet2


@dataclass(frozen=True)
class SignatureData:
    """Sign bookkeeping for a hypersurface of eps*I x_a M^n_k(c).

    ``frame_signs`` are (eps_1, ..., eps_n). ``e0_sign`` orients the unit normal
    of the fiber quadric: e0 = e0_sign * p / (c a).
    """

    n: int
    k: int
    c: int
    eps: int
    eps_normal: int
    frame_signs: tuple
    e0_sign: int = 1

    def __post_init__(self):
        object.__setattr__(self, "frame_signs", tuple(int(s) for s in self.frame_signs))
        for name in ("c", "eps", "eps_normal", "e0_sign"):
            if getattr(self, name) not in (-1, 1):
                raise ValueError(f"{name} must be +1 or -1")
        if any(s not in (-1, 1) for s in self.frame_signs):
            raise ValueError("frame signs must be +1 or -1")
        if len(self.frame_signs) != self.n:
            raise ValueError("need one frame sign per chart dimension")
        if not 0 <= self.k <= self.n:
            raise ValueError("fiber index k must lie in [0, n]")
        minus = sum(1 for s in self.G_diag if s < 0)
        if minus != self.q:
            raise ValueError(
                f"sign multiset has {minus} minus signs but the group index is {self.q}"
            )

    @property
    def eps0(self) -> int:
        return self.c

    @property
    def q(self) -> int:
        return self.k + abs(self.c - 1) // 2 + abs(self.eps - 1) // 2

    @property
    def G_diag(self) -> tuple:
        return (self.c, *self.frame_signs, self.eps_normal)

    @property
    def G(self) -> np.ndarray:
        return np.diag(np.array(self.G_diag, dtype=float))

    def require_frame_layout(self):
        if self.eps_normal != self.eps:
            raise ValueError(
                "frames and reconstruction need eps_normal == eps: the ambient basis "
                "reordering puts d_t in the last slot, so the normal slot inherits eps"
            )


def ambient_metric(a_value, signs: SignatureData) -> np.ndarray:
    """Metric on slots at a given warp value. The flat factor has signs G_diag[:n+1]."""
    s = np.asarray(signs.G_diag[:-1], dtype=float)
    return np.diag(np.concatenate([a_value**2 * s, [signs.eps]]))


def _inner(X, Y, a_value, signs):
    s = np.asarray(signs.G_diag[:-1], dtype=float)
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    return a_value**2 * np.sum(s * X[..., :-1] * Y[..., :-1], axis=-1) + signs.eps * X[..., -1] * Y[..., -1]


def _dt(X, signs):
    # <X, d_t>
    return signs.eps * np.asarray(X, dtype=float)[..., -1]


def _blocks(X, Y, Z, W, a_value, signs):
    ip = lambda P, Q: _inner(P, Q, a_value, signs)
    metric = ip(X, Z) * ip(Y, W) - ip(Y, Z) * ip(X, W)
    tx, ty, tz, tw = (_dt(V, signs) for V in (X, Y, Z, W))
    time = ip(X, Z) * ty * tw - ip(Y, Z) * tx * tw - ip(X, W) * ty * tz + ip(Y, W) * tx * tz
    return metric, time


def curvature_flat_warp(X, Y, Z, W, a: Jet2, signs: SignatureData):
    """R(X,Y,Z,W) of eps*I x_a E^{n+1}."""
    a0, a1, a2 = a.value, a.d1, a.d2
    metric, time = _blocks(X, Y, Z, W, a0, signs)
    return signs.eps * a1**2 / a0**2 * metric + (a2 / a0 - a1**2 / a0**2) * time


def spaceform_coefficients(a: Jet2, signs: SignatureData):
    """The two scalar coefficients of the curvature of eps*I x_a M^n_k(c)."""
    a0, a1, a2 = a.value, a.d1, a.d2
    k1 = signs.eps * a1**2 / a0**2 - signs.eps0 / a0**2
    k2 = a2 / a0 - a1**2 / a0**2 + signs.eps * signs.eps0 / a0**2
    return k1, k2


def curvature_warp_spaceform(X, Y, Z, W, a: Jet2, signs: SignatureData):
    """R(X,Y,Z,W) of eps*I x_a M^n_k(c) for vectors tangent to it."""
    k1, k2 = spaceform_coefficients(a, signs)
    metric, time = _blocks(X, Y, Z, W, a.value, signs)
    return k1 * metric + k2 * time


def spaceform_embed(p, a_value, signs: SignatureData, t=0.0, tol=1e-10):
    """Point (t, p) of the ambient space and the unit normal e0 of the fiber quadric."""
    p = np.asarray(p, dtype=float)
    s = np.asarray(signs.G_diag[:-1], dtype=float)
    norm = np.sum(s * p * p, axis=-1)
    if np.any(np.abs(norm - signs.c) > tol):
        raise ValueError("point is not on the quadric g0(p, p) = c")
    point = np.concatenate([p, np.broadcast_to(np.asarray(t, dtype=float), p.shape[:-1])[..., None]], axis=-1)
    e0 = np.concatenate([signs.e0_sign * p / (signs.c * a_value), np.zeros(p.shape[:-1] + (1,))], axis=-1)
    return point, e0


def shape_S(Y, a: Jet2, signs: SignatureData):
    """Shape operator of the fiber quadric with respect to e0."""
    Y = np.asarray(Y, dtype=float)
    proj = Y.copy()
    proj[..., -1] = 0.0  # Y - eps <Y, d_t> d_t
    return -signs.e0_sign * proj / (a.value * signs.c)


def gauss_rhs(X, Y, Z, W, metric, T, A, a: Jet2, signs: SignatureData):
    """Target value of R(X,Y,Z,W) on a hypersurface satisfying the structure conditions.

    X..W and T are tangent vectors and A a linear map, all in one basis whose
    Gram matrix is ``metric``. Arrays broadcast over leading node axes.
    """
    ip = lambda P, Q: np.einsum("...i,...ij,...j->...", P, metric, Q)
    AX = lambda P: np.einsum("...ij,...j->...i", A, P)
    k1, k2 = spaceform_coefficients(a, signs)
    ex, ey, ez, ew = (ip(V, T) for V in (X, Y, Z, W))
    metric_block = ip(X, Z) * ip(Y, W) - ip(Y, Z) * ip(X, W)
    eta_block = ip(X, Z) * ey * ew - ip(Y, Z) * ex * ew - ip(X, W) * ey * ez + ip(Y, W) * ex * ez
    a_block = ip(AX(Y), Z) * ip(AX(X), W) - ip(AX(Y), W) * ip(AX(X), Z)
    return k1 * metric_block + k2 * eta_block + signs.eps_normal * a_block


def codazzi_rhs(X, Y, metric, T, T_np1, a: Jet2, signs: SignatureData):
    """Target value of (D_X A)Y - (D_Y A)X."""
    ip = lambda P, Q: np.einsum("...i,...ij,...j->...", P, metric, Q)
    _, k2 = spaceform_coefficients(a, signs)
    coef = np.asarray(T_np1 * k2)[..., None]
    return coef * (ip(Y, T)[..., None] * X - ip(X, T)[..., None] * Y)


def warp_christoffel(X, Y, a: Jet2, signs: SignatureData):
    """Gamma(X, Y) of the warped metric in slot coordinates (x_0..x_n, t)."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    s = np.asarray(signs.G_diag[:-1], dtype=float)
    a0 = np.asarray(a.value)[..., None]
    a1 = np.asarray(a.d1)[..., None]
    out = np.empty(np.broadcast(X, Y).shape)
    out[..., :-1] = (a1 / a0) * (X[..., :-1] * Y[..., -1:] + X[..., -1:] * Y[..., :-1])
    out[..., -1] = -signs.eps * a.value * a.d1 * np.sum(s * X[..., :-1] * Y[..., :-1], axis=-1)
    return out
