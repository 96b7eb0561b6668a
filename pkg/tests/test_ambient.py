import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from warpframe import chart
from warpframe.ambient import (
    SignatureData,
    codazzi_rhs,
    curvature_flat_warp,
    curvature_warp_spaceform,
    gauss_rhs,
    shape_S,
    spaceform_coefficients,
    spaceform_embed,
    warp_christoffel,
)
from warpframe.chart import ChartGrid
from warpframe.expr import Jet2

from conftest import scenario

LORENTZ = SignatureData(n=2, k=0, c=1, eps=-1, eps_normal=-1, frame_signs=(1, 1))
HYPERBOLIC = SignatureData(n=2, k=0, c=-1, eps=1, eps_normal=1, frame_signs=(1, 1), e0_sign=-1)
SIGNS = [LORENTZ, HYPERBOLIC, SignatureData(n=3, k=1, c=1, eps=1, eps_normal=1, frame_signs=(1, -1, 1))]


def test_signature_bookkeeping():
    assert LORENTZ.G_diag == (1, 1, 1, -1)
    assert LORENTZ.q == 1
    assert HYPERBOLIC.q == 1 and HYPERBOLIC.eps0 == -1
    with pytest.raises(ValueError, match="minus signs"):
        SignatureData(n=2, k=0, c=1, eps=-1, eps_normal=1, frame_signs=(1, 1))
    with pytest.raises(ValueError):
        SignatureData(n=2, k=0, c=2, eps=-1, eps_normal=-1, frame_signs=(1, 1))
    with pytest.raises(ValueError):
        SignatureData(n=2, k=0, c=1, eps=-1, eps_normal=-1, frame_signs=(1,))


def test_constant_warp_flat_curvature_vanishes():
    rng = np.random.default_rng(1)
    X, Y, Z, W = rng.standard_normal((4, 4))
    assert curvature_flat_warp(X, Y, Z, W, Jet2(3.0, 0.0, 0.0), LORENTZ) == 0.0


def test_flat_warp_spatial_plane():
    V = np.array([0.0, 1.0, 0.0, 0.0])
    W = np.array([0.0, 0.0, 1.0, 0.0])
    assert curvature_flat_warp(V, W, V, W, Jet2(1.0, 1.0, 0.0), LORENTZ) == -1.0


def _warp_grid(eps):
    # chart (x0, x1, t) on eps dt^2 + cosh(t)^2 (dx0^2 + dx1^2)
    signs = SignatureData(n=1, k=0, c=1, eps=eps, eps_normal=eps, frame_signs=(1,))
    grid = ChartGrid((0.0, 0.0, 0.2), (1.0, 1.0, 1.0), (9, 9, 161), ("x0", "x1", "t"))
    t = grid.coords()[2]
    a = Jet2(np.cosh(t), np.sinh(t), np.cosh(t))
    g = np.zeros(grid.shape + (3, 3))
    g[..., 0, 0] = g[..., 1, 1] = a.value**2
    g[..., 2, 2] = eps
    dg = np.zeros(grid.shape + (3, 3, 3))
    dg[..., 2, 0, 0] = dg[..., 2, 1, 1] = 2 * a.value * a.d1
    return signs, grid, a, g, dg


@pytest.mark.parametrize("eps", [-1, 1])
def test_flat_warp_curvature_matches_finite_differences(eps):
    signs, grid, a, g, dg = _warp_grid(eps)
    R = chart.riemann(g, grid, dg)
    basis = np.eye(3)
    inner = grid.interior()
    worst = 0.0
    for i, j, k, l in np.ndindex(3, 3, 3, 3):
        vec = [np.broadcast_to(basis[x], grid.shape + (3,)) for x in (i, j, k, l)]
        expect = curvature_flat_warp(*vec, a, signs)
        worst = max(worst, float(np.max(np.abs(R[..., i, j, k, l] - expect)[inner])))
    assert worst < 1e-4


@pytest.mark.parametrize("eps", [-1, 1])
def test_warp_christoffel_matches_chart_christoffel(eps):
    signs, grid, a, g, dg = _warp_grid(eps)
    gam = chart.christoffel(g, grid, dg)
    rng = np.random.default_rng(5)
    X, Y = rng.standard_normal((2, 3))
    expect = np.einsum("...kij,i,j->...k", gam, X, Y)
    got = warp_christoffel(np.broadcast_to(X, grid.shape + (3,)), np.broadcast_to(Y, grid.shape + (3,)), a, signs)
    np.testing.assert_allclose(got, expect, atol=1e-12)


def test_spaceform_unit_fiber_curvature():
    V = np.array([0.0, 1.0, 0.0, 0.0])
    W = np.array([0.0, 0.0, 1.0, 0.0])
    assert curvature_warp_spaceform(V, W, V, W, Jet2(1.0, 0.0, 0.0), LORENTZ) == -1.0


def test_spaceform_second_coefficient_can_vanish():
    a0, a1 = 2.0, 0.7
    a2 = a0 * (a1**2 / a0**2 - LORENTZ.eps * LORENTZ.eps0 / a0**2)
    jet = Jet2(a0, a1, a2)
    k1, k2 = spaceform_coefficients(jet, LORENTZ)
    assert k2 == pytest.approx(0.0, abs=1e-15)
    rng = np.random.default_rng(2)
    X, Y, Z, W = rng.standard_normal((4, 4))
    ip = lambda P, Q: a0**2 * np.dot(P[:3], Q[:3]) - P[3] * Q[3]
    metric = ip(X, Z) * ip(Y, W) - ip(Y, Z) * ip(X, W)
    assert curvature_warp_spaceform(X, Y, Z, W, jet, LORENTZ) == pytest.approx(k1 * metric, rel=1e-12)


vec4 = arrays(np.float64, 4, elements=st.floats(-2, 2))
jets = st.tuples(st.floats(0.5, 3), st.floats(-2, 2), st.floats(-2, 2))


@settings(max_examples=100, deadline=None)
@given(vec4, vec4, vec4, vec4, vec4, jets, st.floats(-2, 2), st.sampled_from([0, 1]))
def test_curvature_symmetries(X, Y, Z, W, V, aj, lam, which):
    a = Jet2(*aj)
    signs = [LORENTZ, HYPERBOLIC][which]
    for R in (curvature_flat_warp, curvature_warp_spaceform):
        base = R(X, Y, Z, W, a, signs)
        scale = 1e-12 * max(1.0, abs(base), float(np.max(np.abs([X, Y, Z, W, V]))) ** 4 * 100)
        assert R(Y, X, Z, W, a, signs) == pytest.approx(-base, abs=scale)
        assert R(X, Y, W, Z, a, signs) == pytest.approx(-base, abs=scale)
        assert R(Z, W, X, Y, a, signs) == pytest.approx(base, abs=scale)
        lin = R(X + lam * V, Y, Z, W, a, signs)
        assert lin == pytest.approx(base + lam * R(V, Y, Z, W, a, signs), abs=scale * 10)


def _quadric_point(rng, signs):
    s = np.asarray(signs.G_diag[:-1], dtype=float)
    while True:
        p = rng.standard_normal(len(s))
        q = np.sum(s * p * p)
        if q * signs.c > 0.1:
            return p / math.sqrt(abs(q))


def _tangent(rng, p, signs):
    s = np.asarray(signs.G_diag[:-1], dtype=float)
    x = rng.standard_normal(len(s))
    x = x - np.sum(s * x * p) / signs.c * p
    return np.concatenate([x, [rng.standard_normal()]])


@pytest.mark.parametrize("signs", SIGNS)
def test_spaceform_curvature_from_gauss_equation(signs):
    # curvature of I x M as a hypersurface of I x E with normal e0 and operator S
    rng = np.random.default_rng(9)
    for _ in range(50):
        p = _quadric_point(rng, signs)
        a = Jet2(*rng.uniform([0.5, -1, -1], [2, 1, 1]))
        X, Y, Z, W = (_tangent(rng, p, signs) for _ in range(4))
        s = np.asarray(signs.G_diag[:-1], dtype=float)
        ip = lambda P, Q: a.value**2 * np.sum(s * P[:-1] * Q[:-1]) + signs.eps * P[-1] * Q[-1]
        S = lambda P: shape_S(P, a, signs)
        extrinsic = signs.eps0 * (ip(S(Y), Z) * ip(S(X), W) - ip(S(X), Z) * ip(S(Y), W))
        lhs = curvature_warp_spaceform(X, Y, Z, W, a, signs)
        rhs = curvature_flat_warp(X, Y, Z, W, a, signs) + extrinsic
        assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-10)


@pytest.mark.parametrize("signs", SIGNS)
def test_shape_operator_is_scaled_tangential_projection(signs):
    rng = np.random.default_rng(4)
    a = Jet2(1.7, 0.3, 0.1)
    p = _quadric_point(rng, signs)
    _, e0 = spaceform_embed(p, a.value, signs)
    s = np.asarray(signs.G_diag, dtype=float)
    for _ in range(20):
        Y = rng.standard_normal(len(s))
        Y_tan = Y.copy()
        Y_tan[-1] = 0.0
        np.testing.assert_allclose(shape_S(Y, a, signs), -signs.e0_sign / (a.value * signs.c) * Y_tan)
        np.testing.assert_allclose(shape_S(2 * Y, a, signs), 2 * shape_S(Y, a, signs))
    dt = np.zeros(len(s))
    dt[-1] = 1.0
    assert np.all(shape_S(dt, a, signs) == 0.0)


def test_shape_operator_spatial_example():
    Y = np.array([0.0, 1.0, 0.0, 0.0])
    np.testing.assert_array_equal(shape_S(Y, Jet2(2.0), LORENTZ), -Y / 2)


def test_embed_examples():
    point, e0 = spaceform_embed(np.array([1.0, 0.0, 0.0]), 2.0, LORENTZ, t=0.5)
    np.testing.assert_array_equal(e0, [0.5, 0.0, 0.0, 0.0])
    np.testing.assert_array_equal(point, [1.0, 0.0, 0.0, 0.5])
    # hyperboloid: slot 0 carries the minus sign of the flat factor
    plain = SignatureData(n=2, k=0, c=-1, eps=1, eps_normal=1, frame_signs=(1, 1))
    _, e0 = spaceform_embed(np.array([1.0, 0.0, 0.0]), 1.0, plain)
    s = np.array(plain.G_diag[:-1], dtype=float)
    assert np.sum(s * e0[:-1] ** 2) == -1.0
    with pytest.raises(ValueError):
        spaceform_embed(np.array([1.0, 1.0, 0.0]), 1.0, LORENTZ)


def test_embed_helicoid_normal():
    # slots (z, y, x): p at (u, v) = (1, 0) is (sqrt 2, 0, 1)
    _, e0 = spaceform_embed(np.array([math.sqrt(2.0), 0.0, 1.0]), 1.0, HYPERBOLIC)
    np.testing.assert_allclose(e0[[2, 1, 0, 3]], [1.0, 0.0, math.sqrt(2.0), 0.0], atol=1e-15)


def test_gauss_and_codazzi_targets_without_T_and_A():
    rng = np.random.default_rng(8)
    metric = np.array([[2.0, 0.3], [0.3, 1.0]])
    a = Jet2(1.5, 0.4, -0.2)
    X, Y, Z, W = rng.standard_normal((4, 2))
    ip = lambda P, Q: P @ metric @ Q
    k1, _ = spaceform_coefficients(a, LORENTZ)
    zero = np.zeros(2)
    expect = k1 * (ip(X, Z) * ip(Y, W) - ip(Y, Z) * ip(X, W))
    assert gauss_rhs(X, Y, Z, W, metric, zero, np.zeros((2, 2)), a, LORENTZ) == pytest.approx(expect)
    np.testing.assert_array_equal(codazzi_rhs(X, Y, metric, zero, 0.7, a, LORENTZ), 0.0)
    T = rng.standard_normal(2)
    np.testing.assert_allclose(codazzi_rhs(X, 3 * X, metric, T, 0.7, a, LORENTZ), 0.0, atol=1e-14)


def test_gauss_target_matches_round_slice_curvature():
    sc = scenario("example1", 201, h="2")
    d = sc.data
    idx = (100, 100)
    assert d.grid.node_coords(idx)[0] == pytest.approx(math.pi / 2)
    R = chart.riemann(d.metric, d.grid, d.metric_d)[idx]
    F = d.frame[idx]
    e1, e2 = F[:, 0], F[:, 1]
    intrinsic = np.einsum("ijkl,i,j,k,l->", R, e1, e2, e2, e1)
    target = gauss_rhs(e1, e2, e2, e1, d.metric[idx], d.T_coord()[idx], d.A_coord()[idx],
                       d.warp.jet(d.pi[idx]), d.signs)
    assert intrinsic == pytest.approx(1 / 4, rel=1e-3)  # round sphere of radius 2, up to O(h^2)
    assert float(target) == pytest.approx(intrinsic, abs=1e-4)
