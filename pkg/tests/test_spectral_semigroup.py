import numpy as np
import pytest

from helpers import cplx, resolved_min_real
from qgbc.boundary_conditions import PreconditionError
from qgbc.cli_io.generators import dirichlet_interval, gen_counterexample, gen_delta, gen_delta_prime, neumann_interval
from qgbc.graph_core import GridError, MetricGraph, make_grid
from qgbc.spectral_semigroup import (
    assemble,
    audit_contractivity,
    evolve,
    evolve_operator,
    growth_bound,
    suggested_R,
)


def test_dirichlet_ground_state():
    bc = dirichlet_interval(np.pi)
    w = [assemble(bc, h=h).eigenvalues()[0].real for h in (np.pi / 200, np.pi / 400)]
    assert abs(w[0] - 1) < 1e-3
    assert abs((4 * w[1] - w[0]) / 3 - 1) < 1e-6


def test_dirichlet_higher_eigenvalues():
    w = assemble(dirichlet_interval(np.pi), h=np.pi / 400).eigenvalues()[:4]
    np.testing.assert_allclose(w.real, [1, 4, 9, 16], rtol=1e-3)
    np.testing.assert_allclose(w.imag, 0, atol=1e-10)


def test_neumann_ground_state():
    w = assemble(neumann_interval(1.0), h=0.01).eigenvalues()
    assert abs(w[0]) < 1e-6
    assert w[1].real == pytest.approx(np.pi ** 2, rel=1e-3)


def test_counterexample_spectrum_escapes():
    bc = gen_counterexample(0.0)
    res = [resolved_min_real(assemble(bc, h=h, R=5)) for h in (0.1, 0.05, 0.025)]
    vals = [v for v, _ in res]
    for i in range(2):
        assert vals[i + 1] < vals[i] - res[i][1] - res[i + 1][1]
    assert vals[1] / vals[0] >= 2 and vals[2] / vals[1] >= 2


def test_form_scheme_needs_assumption_A():
    with pytest.raises(PreconditionError):
        assemble(gen_counterexample(0.0), h=0.1, R=5, scheme="form")


def test_grid_too_coarse():
    with pytest.raises(GridError):
        assemble(dirichlet_interval(1.0), grid=make_grid(dirichlet_interval(1.0).graph, 0.4))


def test_growth_bound_neumann():
    gb = growth_bound(neumann_interval(2.0))
    assert abs(gb.omega) < 1e-6 and abs(gb.omega_extrapolated) < 1e-6


@pytest.mark.parametrize("n,gamma", [(3, 4.0), (2, 4.0), (4, 2.0)])
def test_growth_bound_delta_bound_state(n, gamma):
    gb = growth_bound(gen_delta(n, gamma))
    exact = -(gamma / n) ** 2
    assert gb.omega == pytest.approx(exact, rel=1e-2)
    assert abs(gb.omega_extrapolated - exact) <= max(gb.error_estimate, 1e-4 * abs(exact))


def test_growth_bound_ignores_imaginary_part():
    a = growth_bound(gen_delta(3, 4.0)).omega
    b = growth_bound(gen_delta(3, 4.0 + 7j)).omega
    assert b == pytest.approx(a, rel=1e-12)


def test_growth_bound_refuses_violations():
    with pytest.raises(PreconditionError):
        growth_bound(gen_counterexample(0.0))


def test_suggested_truncation():
    assert suggested_R(gen_delta(3, -2.0)) == 20.0
    R = suggested_R(gen_delta(3, 0.3))
    assert np.exp(-0.1 * R) <= 1e-8 * (1 + 1e-12)


def test_hermitian_part_matches_growth_bound():
    bc = gen_delta(3, 2 + 3j)
    gb = growth_bound(bc, h=0.05)
    w = [assemble(bc, h=h, R=gb.R).min_hermitian_eigenvalue() for h in (0.05, 0.025)]
    assert w[0] == pytest.approx(gb.omega, rel=1e-8)
    assert w[1] == pytest.approx(gb.omega_half, rel=1e-8)
    assert abs((4 * w[1] - w[0]) / 3 - (-(2 / 3) ** 2)) <= gb.error_estimate


def test_zero_state_stays_zero():
    bc = gen_delta(3, 1 + 1j)
    grid = make_grid(bc.graph, 0.1, R=5)
    tr = evolve(bc, grid.zeros(), dt=0.05, t_end=0.5)
    assert np.all(tr.norms == 0)


def test_neumann_constant_is_stationary():
    bc = neumann_interval(1.0)
    grid = make_grid(bc.graph, 0.01)
    tr = evolve(bc, grid.sample(lambda x: np.ones_like(x)), dt=0.01, t_end=1.0)
    assert np.max(np.abs(np.diff(tr.norms))) < 1e-12


def test_dirichlet_heat_decay():
    bc = dirichlet_interval(np.pi)
    grid = make_grid(bc.graph, np.pi / 200)
    tr = evolve(bc, grid.sample(np.sin), dt=1e-3, t_end=1.0)
    assert tr.norms[-1] / tr.norms[0] == pytest.approx(np.exp(-1.0), rel=1e-4)
    rep = audit_contractivity(tr, growth_bound(bc, h=np.pi / 200).omega)
    assert rep.passed and rep.monotone


def test_audit_neumann():
    bc = neumann_interval(1.0)
    grid = make_grid(bc.graph, 0.02)
    tr = evolve(bc, grid.sample(np.cos), t_end=0.5)
    rep = audit_contractivity(tr, growth_bound(bc).omega)
    assert rep.passed and rep.monotone


def test_audit_attractive_delta():
    bc = gen_delta(2, 4.0)
    gb = growth_bound(bc)
    grid = make_grid(bc.graph, 0.05, R=gb.R)
    tr = evolve(bc, grid.sample(lambda x: np.exp(-x ** 2)), t_end=1.0)
    assert tr.norms[-1] / tr.norms[0] <= np.exp(4.0) * 1.01
    rep = audit_contractivity(tr, gb.omega)
    assert rep.bound_ok and rep.monotone is None
    assert gb.omega == pytest.approx(-4.0, rel=1e-2)


def test_audit_flags_violations():
    from qgbc.spectral_semigroup import Trajectory
    tr = Trajectory(np.array([0.0, 1.0]), np.array([1.0, 1.5]))
    rep = audit_contractivity(tr, 0.0)
    assert not rep.passed and not rep.bound_ok and rep.monotone is False


def test_crank_nicolson_on_eigenvectors():
    import scipy.linalg as sla
    bc = gen_delta(3, 1 + 2j)
    op = assemble(bc, h=0.1, R=5)
    K, M = op.dense()
    w, V = sla.eig(K, M)
    dt = 0.01
    for idx in np.argsort(w.real)[:3]:
        lam, v = w[idx], V[:, idx]
        tr = evolve_operator(op, v, dt, 5, keep_snapshots=True)
        g = (1 - dt * lam / 2) / (1 + dt * lam / 2)
        for k, c in enumerate(tr.snapshots):
            np.testing.assert_allclose(c, g ** k * v, atol=1e-10 * np.linalg.norm(v))


def test_semigroup_property():
    bc = gen_delta(3, -1 + 1j)
    op = assemble(bc, h=0.1, R=5)
    rng = np.random.default_rng(4)
    dt = 0.02
    for _ in range(3):
        c0 = cplx(rng, op.size)
        whole = evolve_operator(op, c0, dt, 30).final
        half = evolve_operator(op, evolve_operator(op, c0, dt, 12).final, dt, 18).final
        np.testing.assert_allclose(half, whole, atol=1e-10 * np.linalg.norm(c0))


def test_phase_invariance_for_self_adjoint():
    bc = gen_delta_prime(2, 3.0)
    grid = make_grid(bc.graph, 0.05, R=6)
    f = grid.sample([lambda x: np.exp(-x ** 2) * (1 + x), lambda x: -np.exp(-x ** 2) * (1 + x)])
    op = assemble(bc, grid=grid)
    c0 = op.project(f)
    a = evolve_operator(op, c0, 0.05, 10).norms
    b = evolve_operator(op, np.exp(0.7j) * c0, 0.05, 10).norms
    np.testing.assert_allclose(a, b, rtol=1e-13)


def test_evolve_refuses_ill_posed_problems():
    bc = gen_counterexample(0.0)
    grid = make_grid(bc.graph, 0.1, R=5)
    f = grid.sample(lambda x: np.exp(-x ** 2) * np.sin(np.pi * x / 5) ** 2)
    with pytest.raises(PreconditionError):
        evolve(bc, f, t_end=0.1)
    tr = evolve(bc, f, t_end=0.1, force=True)
    assert np.all(np.isfinite(tr.norms))


def test_evolve_rejects_states_outside_domain():
    bc = dirichlet_interval(1.0)
    grid = make_grid(bc.graph, 0.05)
    with pytest.raises(PreconditionError):
        evolve(bc, grid.sample(lambda x: 1 + x), t_end=0.1)


def test_internal_edge_graph_evolution_is_contractive():
    g = MetricGraph([0, 1], [(0, 1, 1.0), (1, 0, 2.0)], [0])
    d = g.d()
    rng = np.random.default_rng(8)
    S = cplx(rng, d, d)
    from qgbc.boundary_conditions import BoundaryCondition, check_m_accretive
    U, _ = np.linalg.qr(cplx(rng, d, d))
    Pp = U[:, :3] @ U[:, :3].conj().T
    L = Pp @ (-(S @ S.conj().T)) @ Pp
    bc = BoundaryCondition(np.eye(d) - Pp + L, Pp, g)
    assert check_m_accretive(bc)
    op = assemble(bc, h=0.05, R=4)
    c0 = cplx(rng, op.size)
    norms = evolve_operator(op, c0, 0.01, 50).norms
    assert np.all(np.diff(norms) <= 1e-10 * norms[:-1])


@pytest.mark.parametrize("gamma", [4.0, -1 + 2j, 0.5j])
def test_shift_invert_matches_dense_solver(gamma):
    import scipy.linalg as sla
    bc = gen_delta(3, gamma)
    op = assemble(bc, h=0.02, R=4)
    assert op.sparse and op.size > 400
    K, M = op.dense()
    dense = sla.eigh(0.5 * (K + K.conj().T), M, eigvals_only=True, subset_by_index=[0, 0])[0]
    assert op.min_hermitian_eigenvalue() == pytest.approx(dense, rel=1e-9, abs=1e-9)
