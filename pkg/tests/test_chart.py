import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from warpframe import chart
from warpframe.chart import ChartGrid


def diag_metric(grid, guu, gvv):
    g = np.zeros(grid.shape + (2, 2))
    g[..., 0, 0] = guu
    g[..., 1, 1] = gvv
    return g


def sphere(n, lo=0.3, hi=2.8):
    grid = ChartGrid((lo, -1.0), (hi, 1.0), (n, n), ("u", "v"))
    u, _ = grid.coords()
    return grid, diag_metric(grid, 1.0, np.sin(u) ** 2)


def node_at(grid, *values):
    idx = tuple(int(np.argmin(np.abs(ax - x))) for ax, x in zip(grid.axes, values))
    for ax, i, x in zip(grid.axes, idx, values):
        assert ax[i] == pytest.approx(x, abs=1e-12)
    return idx


def test_grid_validation():
    with pytest.raises(ValueError):
        ChartGrid((0, 0), (1, 1), (4, 10))
    with pytest.raises(ValueError):
        ChartGrid((0, 0), (0, 1), (10, 10))
    g = ChartGrid((0, 0), (1, 2), (11, 21))
    assert g.spacing == pytest.approx((0.1, 0.1))
    assert g.resized(6).counts == (6, 6)


@pytest.mark.parametrize("scale", [1.0, 4.0])
def test_flat_metric_has_no_christoffels_or_curvature(scale):
    grid = ChartGrid((0, 0), (1, 1), (9, 9))
    g = diag_metric(grid, scale, scale)
    assert np.max(np.abs(chart.christoffel(g, grid))) == 0.0
    assert np.max(np.abs(chart.riemann(g, grid))) == 0.0


def test_sphere_christoffel_at_quarter_pi():
    n = 201
    grid = ChartGrid((math.pi / 4 - 0.5, -1.0), (math.pi / 4 + 0.5, 1.0), (n, n))
    u, _ = grid.coords()
    gam = chart.christoffel(diag_metric(grid, 1.0, np.sin(u) ** 2), grid)
    idx = node_at(grid, math.pi / 4, 0.0)
    assert gam[idx][0, 1, 1] == pytest.approx(-0.5, abs=1e-4)
    # exact metric partials give the closed form to rounding
    dg = np.zeros(grid.shape + (2, 2, 2))
    dg[..., 0, 1, 1] = 2 * np.sin(u) * np.cos(u)
    exact = chart.christoffel(diag_metric(grid, 1.0, np.sin(u) ** 2), grid, dg)
    assert exact[idx][0, 1, 1] == pytest.approx(-0.5, abs=1e-15)


def test_polar_christoffel():
    grid = ChartGrid((1.0, 0.0), (3.0, 1.0), (101, 11))
    u, _ = grid.coords()
    gam = chart.christoffel(diag_metric(grid, 1.0, u**2), grid)
    idx = node_at(grid, 2.0, 0.5)
    assert gam[idx][1, 0, 1] == pytest.approx(0.5, abs=1e-12)  # quadratic metric: stencil is exact
    assert gam[idx][1, 1, 0] == gam[idx][1, 0, 1]


def test_christoffel_symmetric_by_construction():
    grid, g = sphere(31)
    rng = np.random.default_rng(0)
    g = g + 0.05 * rng.standard_normal(grid.shape)[..., None, None] * np.array([[0, 1], [1, 0]])
    gam = chart.christoffel(g, grid)
    assert np.array_equal(gam, np.swapaxes(gam, -1, -2))


def test_sphere_riemann_anchor():
    # R(X,Y)Z = D_X D_Y Z - D_Y D_X Z - D_[X,Y] Z on the unit sphere gives
    # <R(d_u, d_v) d_u, d_v> = -sin^2 u, so the value at the equator is -1.
    grid, g = sphere(201, math.pi / 2 - 0.5, math.pi / 2 + 0.5)
    R = chart.riemann(g, grid)
    idx = node_at(grid, math.pi / 2, 0.0)
    assert R[idx][0, 1, 0, 1] == pytest.approx(-1.0, abs=1e-4)
    assert R[idx][0, 1, 1, 0] == pytest.approx(1.0, abs=1e-4)


def test_riemann_second_order_convergence():
    errs = []
    for n in (51, 101, 201):
        grid, g = sphere(n)
        u, _ = grid.coords()
        R = chart.riemann(g, grid)
        err = np.abs(R[..., 0, 1, 0, 1] + np.sin(u) ** 2)
        errs.append(err[(u >= 0.5) & (u <= 2.6)].max())  # fixed physical box
    for coarse, fine in zip(errs, errs[1:]):
        assert 3.5 <= coarse / fine <= 4.5


def test_exterior_derivative_examples():
    grid = ChartGrid((-1.0, -1.0), (1.0, 1.0), (41, 41))
    u, v = grid.coords()
    form = np.stack([np.zeros_like(u), u], axis=-1)  # u dv
    np.testing.assert_allclose(chart.exterior_d(form, grid)[..., 0], 1.0, atol=1e-12)
    form = np.stack([np.sin(v), np.zeros_like(u)], axis=-1)  # sin(v) du
    d = chart.exterior_d(form, grid)[..., 0]
    idx = node_at(grid, 0.3, 0.0)
    assert d[idx] == pytest.approx(-1.0, abs=1e-3)


def test_d_squared_vanishes():
    # central stencils along different axes commute, so d(d pi) vanishes to
    # rounding at interior nodes, which is stronger than O(h^2)
    grid = ChartGrid((0.0, 0.0), (1.0, 2.0), (81, 81))
    u, v = grid.coords()
    pi = np.exp(u) * np.sin(2 * v) + u**3 * v
    dpi = chart.gradient(pi, grid)
    assert np.max(np.abs(chart.exterior_d(dpi, grid))[grid.interior()]) < 1e-10


def test_wedge_commutator_example():
    grid = ChartGrid((0, 0), (1, 1), (5, 5))
    E = np.array([[0.0, 1.0], [0.0, 0.0]])
    F = np.array([[0.0, 0.0], [1.0, 0.0]])
    A = np.zeros(grid.shape + (2, 2, 2))
    B = np.zeros_like(A)
    A[..., 0, :, :] = E
    B[..., 1, :, :] = F
    # E du ^ F dv on (d_u, d_v) is E F; the commutator E F - F E appears as
    # the self-wedge of E du + F dv
    out = chart.wedge(A, B, 2)[..., 0, :, :]
    np.testing.assert_array_equal(out, np.broadcast_to(E @ F, out.shape))
    S = A + B
    out = chart.wedge(S, S, 2)[..., 0, :, :]
    np.testing.assert_array_equal(out, np.broadcast_to([[1.0, 0.0], [0.0, -1.0]], out.shape))
    np.testing.assert_array_equal(chart.wedge(A, A, 2), 0.0)


def test_fourth_order_partial():
    errs = []
    for n in (21, 41):
        grid = ChartGrid((0.0, 0.0), (2.0, 1.0), (n, 5))
        u, _ = grid.coords()
        errs.append(np.max(np.abs(chart.partial(np.sin(u), grid, 0, order=4) - np.cos(u))))
    assert errs[0] / errs[1] > 12
    with pytest.raises(ValueError):
        chart.partial(np.sin(u), grid, 0, order=3)


def test_metric_validation():
    grid = ChartGrid((0, 0), (1, 1), (5, 5))
    with pytest.raises(ValueError, match="degenerate"):
        chart.validate_metric(diag_metric(grid, 1.0, 1e-12))
    bad = diag_metric(grid, 1.0, 1.0)
    bad[..., 0, 1] = 0.3
    with pytest.raises(ValueError, match="symmetric"):
        chart.validate_metric(bad)
    with pytest.raises(ValueError, match="signature"):
        chart.validate_metric(diag_metric(grid, 1.0, 1.0), signs=(1, -1))


@settings(max_examples=15, deadline=None)
@given(
    st.floats(-0.5, 0.5),
    st.floats(-0.5, 0.5),
    st.floats(-0.3, 0.3),
    st.sampled_from([1.0, -1.0]),
)
def test_riemann_symmetries(a, b, c, sign):
    grid = ChartGrid((0.0, 0.0), (1.0, 1.0), (41, 41))
    u, v = grid.coords()
    g = np.zeros(grid.shape + (2, 2))
    g[..., 0, 0] = np.exp(a * u + b * v * v)
    g[..., 1, 1] = sign * np.exp(c * u * v)
    g[..., 0, 1] = g[..., 1, 0] = 0.1 * c * np.sin(u + v)
    R = chart.riemann(g, grid)[grid.interior()]
    scale = max(1.0, float(np.max(np.abs(R))))
    np.testing.assert_allclose(R, -np.swapaxes(R, -4, -3), atol=1e-14 * scale)
    np.testing.assert_allclose(R, -np.swapaxes(R, -2, -1), atol=5e-3 * scale)
    np.testing.assert_allclose(R, np.transpose(R, (0, 1, 4, 5, 2, 3)), atol=5e-3 * scale)
