import dataclasses

import numpy as np
import pytest
import scipy.linalg
from conftest import scenario

from warpframe import horizons


# ---------------------------------------------------------------- helpers


def sign_consistent(rng, lorentzian: bool):
    """Random (frame signs, T, T4, eps4) with <T,T> + eps4 T4^2 = -1 and eps4 sign(<T,T>) = -1."""
    if lorentzian:
        signs = np.array([1.0, 1.0, 1.0])
        signs[rng.integers(3)] = -1.0
        eps4 = 1.0
        T4 = rng.uniform(-3, 3)
        TT = -1.0 - T4**2
    else:
        signs = np.ones(3)
        eps4 = -1.0
        T4 = rng.choice([-1, 1]) * rng.uniform(1.05, 3)
        TT = T4**2 - 1.0
    # a vector of the requested causal type, scaled to norm TT
    while True:
        d = rng.normal(size=3)
        if lorentzian:
            d[signs < 0] *= 4.0
        nd = np.sum(signs * d * d)
        if np.sign(nd) == np.sign(TT) and abs(nd) > 0.1:
            break
    t_vec = d * np.sqrt(TT / nd)
    return signs, signs * t_vec, T4, eps4, TT


def random_self_adjoint(rng, signs):
    """Frame matrix A[i, k] (e_i component of A e_k) with G A symmetric."""
    S = rng.normal(size=(3, 3))
    S = S + S.T
    return np.diag(signs) @ S


def inner(x, y, signs):
    return float(np.sum(signs * x * y))


def leaf_basis(t_vec, signs, rng):
    """Orthonormal basis of the orthogonal complement of T, by G-Gram-Schmidt."""
    basis = []
    tt = inner(t_vec, t_vec, signs)
    while len(basis) < 2:
        v = rng.normal(size=3)
        v = v - inner(v, t_vec, signs) / tt * t_vec
        for b in basis:
            v = v - inner(v, b, signs) / inner(b, b, signs) * b
        nv = inner(v, v, signs)
        if abs(nv) > 1e-3:
            basis.append(v / np.sqrt(abs(nv)))
    return basis


def brute_force_Hsq(A, T, T4, eps4, rate, signs, rng):
    """Trace sigma over an orthonormal leaf basis and take the ambient norm.

    The normal part of the leaf second fundamental form has a component along T
    (from the connection of M, nabla_X T = rate X + eps4 T4 A X on the leaf) and
    one along the hypersurface normal (from A). The two normals are orthogonal,
    with norms <T,T> and eps4.
    """
    t_vec = signs * T
    tt = inner(t_vec, t_vec, signs)
    coef_T, coef_N = 0.0, 0.0
    for u in leaf_basis(t_vec, signs, rng):
        eu = inner(u, u, signs)  # +1 on a spacelike leaf
        grad_T = rate * u + eps4 * T4 * (A @ u)
        coef_T += eu * (-1.0 / tt) * inner(u, grad_T, signs)
        coef_N += eu * eps4 * inner(u, A @ u, signs)
    H_T, H_N = coef_T / 2, coef_N / 2
    return H_T**2 * tt + H_N**2 * eps4


# ---------------------------------------------------------------- mean_h


@pytest.mark.parametrize("lam", [-1.5, 0.0, 0.3, 2.0])
def test_mean_h_umbilic(lam):
    T = np.array([0.4, -1.2, 0.7])
    assert horizons.mean_h(lam * np.eye(3), T, (1, 1, 1)) == pytest.approx(2 * lam, abs=1e-14)
    assert horizons.mean_h(lam * np.eye(3), T, (-1, 1, 1)) == pytest.approx(2 * lam, abs=1e-14)


@pytest.mark.parametrize("tau", [0.1, -1.0, 7.5])
def test_mean_h_diagonal(tau):
    A = np.diag([1.0, 2.0, 3.0])
    assert horizons.mean_h(A, np.array([tau, 0, 0]), (1, 1, 1)) == pytest.approx(5.0, abs=1e-14)
    assert horizons.mean_h(A, np.array([tau, 0, 0]), (-1, 1, 1)) == pytest.approx(5.0, abs=1e-14)


@pytest.mark.parametrize("lorentzian", [False, True])
def test_mean_h_against_vector_arithmetic(lorentzian):
    rng = np.random.default_rng(11)
    for _ in range(200):
        signs, T, *_ = sign_consistent(rng, lorentzian)
        A = random_self_adjoint(rng, signs)
        t_vec = signs * T
        AT = A @ t_vec
        expected = np.trace(A) - inner(AT, t_vec, signs) / inner(t_vec, t_vec, signs)
        assert horizons.mean_h(A, T, signs) == pytest.approx(expected, rel=1e-12, abs=1e-12)


def test_mean_h_vectorized_matches_pointwise():
    rng = np.random.default_rng(3)
    A = np.stack([random_self_adjoint(rng, np.ones(3)) for _ in range(20)])
    T = rng.normal(size=(20, 3))
    batch = horizons.mean_h(A, T, (1, 1, 1))
    single = [horizons.mean_h(A[i], T[i], (1, 1, 1)) for i in range(20)]
    np.testing.assert_allclose(batch, single, rtol=1e-14)


def test_mean_h_masks_degenerate_T():
    out = horizons.mean_h(np.eye(3), np.array([1e-5, 0, 0]), (1, 1, 1))
    assert np.isnan(out)
    # a null T in Lorentzian signature is degenerate as well
    assert np.isnan(horizons.mean_h(np.eye(3), np.array([1.0, 1.0, 0]), (-1, 1, 1)))


@pytest.mark.parametrize("lorentzian", [False, True])
def test_mean_h_frame_covariance(lorentzian):
    rng = np.random.default_rng(5)
    for _ in range(50):
        signs, T, T4, eps4, TT = sign_consistent(rng, lorentzian)
        A = random_self_adjoint(rng, signs)
        G = np.diag(signs)
        K = rng.normal(size=(3, 3))
        L = scipy.linalg.expm(G @ (K - K.T))  # preserves G
        np.testing.assert_allclose(L.T @ G @ L, G, atol=1e-10)
        T2 = signs * (L @ (signs * T))
        A2 = L @ A @ np.linalg.inv(L)
        h1, h2 = horizons.mean_h(A, T, signs), horizons.mean_h(A2, T2, signs)
        assert h2 == pytest.approx(h1, rel=1e-9, abs=1e-9)
        rate = rng.uniform(-2, 2)
        q1 = horizons.h_squared_closed(h1, rate, T4, eps4, horizons.inner_TT(T, signs))
        q2 = horizons.h_squared_closed(h2, rate, T4, eps4, horizons.inner_TT(T2, signs))
        assert q2 == pytest.approx(q1, rel=1e-9, abs=1e-9)


# ---------------------------------------------------------------- closed form


def test_worked_points_exact():
    assert horizons.h_squared_closed(2.0, 1.0, 0.0, 1.0, -1.0) == 0.0
    assert horizons.h_squared_closed(3.0, 1.0, 0.0, 1.0, -1.0) == 1.25


@pytest.mark.parametrize("TT", [-1.0, -2.5, 3.0])
def test_zero_h_sign_follows_T(TT):
    rate = 0.7
    val = horizons.h_squared_closed(0.0, rate, 0.0, -np.sign(TT), TT)
    assert 4 * val == pytest.approx((2 * rate) ** 2 / TT, rel=1e-15)
    assert np.sign(val) == np.sign(TT)


def test_null_exactly_at_quadratic_roots():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(1000):
        eps4 = rng.choice([-1.0, 1.0])
        T4 = rng.uniform(-3, 3) if eps4 > 0 else rng.choice([-1, 1]) * rng.uniform(1.0, 3)
        TT = -1.0 - eps4 * T4**2
        rate = rng.uniform(-2, 2)
        for root in horizons.null_roots(rate, T4, eps4):
            worst = max(worst, abs(horizons.h_squared_closed(root, rate, T4, eps4, TT)))
            # and nowhere nearby: the form is a nondegenerate quadratic in h
            if abs(rate) > 0.05:
                off = horizons.h_squared_closed(root + 0.1, rate, T4, eps4, TT)
                assert abs(off) > 1e-6
    assert worst <= 1e-10


def test_quadratic_roots_satisfy_quadratic():
    rng = np.random.default_rng(9)
    for _ in range(200):
        eps4 = rng.choice([-1.0, 1.0])
        T4 = rng.uniform(1.0, 2.0) * rng.choice([-1, 1])
        rate = rng.uniform(-2, 2)
        for r in horizons.null_roots(rate, T4, eps4):
            assert r**2 - 4 * rate * T4 * r - 4 * eps4 * rate**2 == pytest.approx(0.0, abs=1e-10)


@pytest.mark.parametrize("lorentzian", [False, True])
def test_closed_form_matches_sigma_trace(lorentzian):
    rng = np.random.default_rng(77 if lorentzian else 78)
    for _ in range(300):
        signs, T, T4, eps4, TT = sign_consistent(rng, lorentzian)
        A = random_self_adjoint(rng, signs)
        rate = rng.uniform(-2, 2)
        h = horizons.mean_h(A, T, signs)
        closed = horizons.h_squared_closed(h, rate, T4, eps4, horizons.inner_TT(T, signs))
        brute = brute_force_Hsq(A, T, T4, eps4, rate, signs, rng)
        assert 4 * closed == pytest.approx(4 * brute, rel=1e-8, abs=1e-8)


def test_zero_T4_flag_rule():
    """T4 = 0 and eps4 = +1: null iff |h| = 2|a'/a|."""
    for rate in (-1.3, 0.4, 2.0):
        rp, rm = horizons.null_roots(rate, 0.0, 1.0)
        assert sorted([rp, rm]) == pytest.approx(sorted([2 * abs(rate), -2 * abs(rate)]))
        for h in (2 * abs(rate), -2 * abs(rate)):
            assert horizons.h_squared_closed(h, rate, 0.0, 1.0, -1.0) == pytest.approx(0.0, abs=1e-14)
        assert abs(horizons.h_squared_closed(2 * abs(rate) * 1.01, rate, 0.0, 1.0, -1.0)) > 1e-3


def test_closed_form_roots_comparison():
    rng = np.random.default_rng(4)
    for _ in range(100):
        eps4 = rng.choice([-1.0, 1.0])
        T4 = rng.uniform(1.1, 3) * rng.choice([-1, 1])
        TT = -1.0 - eps4 * T4**2
        a, a1 = rng.uniform(0.5, 3), rng.uniform(-2, 2)
        rate = a1 / a
        quad = sorted(horizons.null_roots(rate, T4, eps4))
        assert sorted(horizons.closed_form_roots(a1, a, T4, TT)) == pytest.approx(quad, rel=1e-12, abs=1e-12)
        if a1 != 0 and abs(a - 1) > 0.1:
            literal = sorted(horizons.closed_form_roots(a1, a, T4, TT, literal=True))
            assert literal != pytest.approx(quad, rel=1e-6)
    # with a = 1 the two readings coincide
    assert horizons.closed_form_roots(0.8, 1.0, 1.5, -3.25, literal=True) == \
        pytest.approx(horizons.closed_form_roots(0.8, 1.0, 1.5, -3.25))


# ---------------------------------------------------------------- scans


@pytest.fixture(scope="module")
def sphere3():
    return scenario("graph-sphere3", 24)


def test_requires_rw_dimensions(ex1):
    with pytest.raises(ValueError):
        horizons.trapped_scan(ex1.data)
    with pytest.raises(ValueError):
        horizons.H_squared(ex1.data)


def test_areal_radius_oracle(sphere3):
    """Each leaf u = const is a round 2-sphere of areal radius t sin u."""
    d = sphere3.data
    u = d.grid.coords()[0]
    expected = np.cos(2 * u) / (d.pi * np.sin(u)) ** 2
    _, hsq = horizons.H_squared(d)
    np.testing.assert_allclose(hsq, expected, atol=1e-12)


def test_scan_crossings(sphere3):
    scan = horizons.trapped_scan(sphere3.data)
    assert not scan.mask.any()
    assert scan.spacelike.all() and scan.sign_ok.all()
    crossings = sorted(horizons.null_crossings(scan))
    # pi = h(u) = 2 + 0.3 cos u at u = 3 pi/4 and pi/4
    expected = [2 + 0.3 * np.cos(3 * np.pi / 4), 2 + 0.3 * np.cos(np.pi / 4)]
    assert crossings == pytest.approx(expected, abs=0.02)
    assert not scan.flagged()


def tuned(data, factor=1.0):
    rate = data.warp_jet().d1 / data.warp_jet().value
    rp, _ = horizons.null_roots(rate, data.T_np1, data.signs.eps_normal)
    lam = factor * rp / 2
    return dataclasses.replace(data, A=lam[..., None, None] * np.eye(3))


def test_umbilic_tuning_flags_every_leaf(sphere3):
    scan = horizons.trapped_scan(tuned(sphere3.data))
    assert np.max(np.abs(scan.Hsq)) < 1e-12
    assert scan.null.all()
    assert (scan.branch == 1).all()
    assert len(scan.flagged()) == len(scan.leaves)


def test_umbilic_perturbation_flags_nothing(sphere3):
    scan = horizons.trapped_scan(tuned(sphere3.data, 1.01), tau_trap=1e-6)
    assert not scan.null.any()
    assert not scan.flagged()
    assert all(lf.verdict == "not_null" for lf in scan.leaves)


def test_masked_nodes_make_leaf_indeterminate(sphere3):
    data = tuned(sphere3.data)
    T = data.T.copy()
    T[3, 5, 7] = 0.0
    scan = horizons.trapped_scan(dataclasses.replace(data, T=T))
    assert scan.mask[3, 5, 7] and scan.mask.sum() == 1
    rep = scan.point((3, 5, 7))
    assert rep.mask and rep.h is None and rep.Hsq is None and rep.branch == 0
    label = horizons.pi_bins(data).labels[3, 5, 7]
    verdicts = {lf.label: lf.verdict for lf in scan.leaves}
    assert verdicts[label] == "indeterminate"
    assert sum(v == "null_mean_curvature" for v in verdicts.values()) == len(verdicts) - 1


def test_point_report_fields(sphere3):
    scan = horizons.trapped_scan(sphere3.data)
    rep = scan.point((10, 4, 4))
    assert rep.Hsq == pytest.approx(scan.Hsq[10, 4, 4])
    assert rep.null_mean_curvature == (abs(rep.Hsq) <= scan.tau_trap)
    assert rep.branch in (-1, 1) and rep.spacelike
