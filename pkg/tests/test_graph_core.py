import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qgbc.graph_core import (
    EdgeFunction,
    GraphError,
    GridError,
    MetricGraph,
    fd_weights,
    interval_graph,
    make_grid,
    star_graph,
    trace,
    trace_matrices,
)


def test_zero_function_has_zero_trace():
    g = MetricGraph([0, 1], [(0, 1, 2.0)], [0, 1, 1])
    psi, dpsi = trace(make_grid(g, 0.1, R=5).zeros())
    assert np.all(psi == 0) and np.all(dpsi == 0)


def test_linear_function_on_interval_uses_inward_derivative():
    grid = make_grid(interval_graph(1.0), 0.1)
    psi, dpsi = trace(grid.sample(lambda x: x))
    np.testing.assert_allclose(psi, [0, 1], atol=1e-14)
    np.testing.assert_allclose(dpsi, [1, -1], atol=1e-12)


def test_exponential_on_two_half_lines():
    k = 1j
    grid = make_grid(star_graph(2), 0.001, R=5)
    psi, dpsi = trace(grid.sample(lambda x: np.exp(1j * k * x)))
    np.testing.assert_allclose(psi, [1, 1], atol=1e-12)
    np.testing.assert_allclose(dpsi, [-1, -1], atol=1e-6)


def test_grid_point_counts():
    assert make_grid(interval_graph(1.0), 0.25).point_counts == (5,)
    assert make_grid(star_graph(3), 0.1, R=10).point_counts == (101, 101, 101)


def test_grid_rejects_coarse_spacing():
    with pytest.raises(GridError):
        make_grid(interval_graph(1.0), 2.0)
    with pytest.raises(GridError):
        make_grid(star_graph(2), -0.1)


def test_graph_validation():
    with pytest.raises(GraphError):
        MetricGraph([0], [(0, 1, 1.0)])
    with pytest.raises(GraphError):
        MetricGraph([0, 1], [(0, 1, -1.0)])
    with pytest.raises(GraphError):
        MetricGraph([0, 0], [], [0])
    with pytest.raises(GraphError):
        MetricGraph([0])


def test_default_truncation():
    assert star_graph(3).default_R() == 20.0
    assert MetricGraph([0, 1], [(0, 1, 3.0)], [0]).default_R() == 60.0


def test_boundary_ordering():
    g = MetricGraph(["a", "b"], [("a", "b", 1.0), ("b", "b", 2.0)], ["a"])
    assert g.d() == 5
    assert [g.boundary_index(j) for j in range(5)] == [(0, 0), (1, 0), (2, 0), (1, 1), (2, 1)]
    assert [g.endpoint_vertex(j) for j in range(5)] == ["a", "a", "b", "b", "b"]
    with pytest.raises(IndexError):
        g.index_of(0, 1)


@given(n_ext=st.integers(0, 4), n_int=st.integers(0, 4))
def test_index_round_trip(n_ext, n_int):
    if n_ext + n_int == 0:
        return
    g = MetricGraph([0], [(0, 0, 1.0)] * n_int, [0] * n_ext)
    for j in range(g.d()):
        assert g.index_of(*g.boundary_index(j)) == j


@given(st.integers(0, 2 ** 32 - 1))
def test_trace_is_linear(seed):
    rng = np.random.default_rng(seed)
    grid = make_grid(MetricGraph([0, 1], [(0, 1, 1.5)], [0, 1]), 0.1, R=3)
    f = EdgeFunction(grid, tuple(rng.standard_normal(len(x)) + 1j * rng.standard_normal(len(x)) for x in grid.nodes))
    g = EdgeFunction(grid, tuple(rng.standard_normal(len(x)) for x in grid.nodes))
    a, b = complex(*rng.standard_normal(2)), complex(*rng.standard_normal(2))
    lhs = trace(f * a + g * b)
    pf, pg = trace(f), trace(g)
    for k in range(2):
        np.testing.assert_allclose(lhs[k], a * pf[k] + b * pg[k], atol=1e-12 * (1 + np.abs(lhs[k]).max()))


def test_trace_matrices_match_trace():
    rng = np.random.default_rng(1)
    grid = make_grid(MetricGraph([0, 1], [(0, 1, 1.0), (1, 1, 2.0)], [0]), 0.1, R=2)
    f = EdgeFunction(grid, tuple(rng.standard_normal(len(x)) for x in grid.nodes))
    Tv, Td = trace_matrices(grid)
    v = np.concatenate(f.values)
    psi, dpsi = trace(f)
    np.testing.assert_allclose(Tv @ v, psi, atol=1e-13)
    np.testing.assert_allclose(Td @ v, dpsi, atol=1e-10)


def test_trace_derivative_is_second_order():
    g = interval_graph(2.0)
    errs = []
    for h in (0.1, 0.05, 0.025):
        _, dpsi = trace(make_grid(g, h).sample(np.sin))
        errs.append(np.max(np.abs(dpsi - [1.0, -np.cos(2.0)])))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 1.9)


def test_batched_trace():
    grid = make_grid(star_graph(2), 0.1, R=2)
    vals = tuple(np.stack([np.cos(x), np.sin(x)]) for x in grid.nodes)
    psi, dpsi = trace(EdgeFunction(grid, vals))
    assert psi.shape == (2, 2)
    np.testing.assert_allclose(psi[0], [1, 1])
    np.testing.assert_allclose(dpsi[1], [1, 1], atol=1e-2)


def test_fd_weights_second_derivative():
    w = fd_weights(np.array([0.0, 1.0, 2.0]), 1.0, 2)
    np.testing.assert_allclose(w, [1, -2, 1])


def test_norm_and_energy_of_sine():
    grid = make_grid(interval_graph(np.pi), np.pi / 400)
    f = grid.sample(np.sin)
    assert f.norm_sq() == pytest.approx(np.pi / 2, rel=1e-5)
    assert f.dirichlet_energy() == pytest.approx(np.pi / 2, rel=1e-4)
