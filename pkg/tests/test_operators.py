import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hydrofluct.grid import Grid
from hydrofluct.operators import build_ops, sample_tensor_gradient


@pytest.fixture(scope="module", params=[(12,), (6, 7)])
def ops(request):
    return build_ops(Grid(request.param))


def test_gradient_of_constant_vanishes(ops):
    g = ops.grid
    f = np.full(g.n_nodes, 3.7)
    for a in range(g.d):
        assert np.max(np.abs(ops.central[a] @ f)) < 1e-13


def test_summation_by_parts_is_exact(ops):
    g = ops.grid
    rng = np.random.default_rng(3)
    f = rng.normal(size=g.n_nodes)
    f[g.boundary_ids] = 0.0
    for a in range(g.d):
        h = rng.normal(size=g.n_nodes)
        h[g.boundary_ids] = 0.0
        sbp = np.dot(ops.central[a] @ f, h) + np.dot(f, ops.central[a] @ h)
        assert abs(sbp) < 1e-12 * g.n_nodes


def test_laplacian_exact_on_quadratics():
    g = Grid((13,))
    ops = build_ops(g)
    x = g.coords[:, 0]
    f = x * (1 - x)
    lap = ops.laplacian @ f
    assert np.max(np.abs(lap[g.interior_ids] + 2.0)) < 1e-9


def test_laplacian_exact_on_quadratics_2d():
    g = Grid((8, 9))
    ops = build_ops(g)
    x, y = g.coords[:, 0], g.coords[:, 1]
    f = x * (1 - x) + 0.5 * y * y
    lap = ops.laplacian @ f
    assert np.max(np.abs(lap[g.interior_ids] + 1.0)) < 1e-8


def test_edge_divergence_is_negative_transpose_of_gradient(ops):
    g = ops.grid
    rng = np.random.default_rng(5)
    f = rng.normal(size=g.n_nodes)
    f[g.boundary_ids] = 0.0
    for a in range(g.d):
        w = rng.normal(size=ops.edges[a].n_edges)
        lhs = np.dot(f[g.interior_ids], ops.fv_div[a] @ w)
        rhs = -np.dot(ops.edge_grad[a] @ f, w)
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


def test_edge_average_of_linear_is_midpoint():
    g = Grid((10,))
    ops = build_ops(g)
    x = g.coords[:, 0]
    avg = ops.edge_avg[0] @ (2 * x + 1)
    es = ops.edges[0]
    mid = 0.5 * (x[es.lower] + x[es.upper])
    assert np.allclose(avg, 2 * mid + 1)


def test_corner_samples_cover_and_differentiate():
    g = Grid((6, 6))
    ops = build_ops(g)
    cp, cm = ops.corners
    assert cp.base.size == 25 and cm.base.size == 25
    u = np.stack([g.coords[:, 0] * 2.0, -g.coords[:, 1]], axis=1)
    for cs in (cp, cm):
        c = sample_tensor_gradient(g, cs, u)
        assert np.allclose(c[:, 0, 0], 2.0)
        assert np.allclose(c[:, 1, 1], -1.0)
        assert np.allclose(c[:, 0, 1], 0.0)


@given(st.integers(5, 20))
@settings(max_examples=20, deadline=None)
def test_central_diff_second_order_on_smooth(n):
    g = Grid((n,))
    ops = build_ops(g)
    x = g.coords[:, 0]
    f = np.sin(2 * x)
    err = (ops.central[0] @ f - 2 * np.cos(2 * x))[g.interior_ids]
    assert np.max(np.abs(err)) < 4.0 * max(g.dx) ** 2


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid((3,))
    with pytest.raises(ValueError):
        Grid((4, 4, 4))


def test_grid_pack_roundtrip():
    g = Grid((5, 6))
    rng = np.random.default_rng(0)
    field = rng.normal(size=(g.n_nodes, g.nu))
    field[g.boundary_ids] = 0.0
    x = g.pack_interior(field)
    assert x.shape == (g.n_interior * g.nu,)
    back = g.unpack_interior(x, g.nu)
    assert np.array_equal(back, field)
