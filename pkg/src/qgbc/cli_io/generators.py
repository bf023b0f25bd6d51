"""Boundary conditions used throughout the examples and tests."""

from __future__ import annotations

import numpy as np

from ..boundary_conditions import BoundaryCondition
from ..graph_core import MetricGraph, interval_graph, star_graph


def _delta_matrices(n: int, gamma: complex) -> tuple[np.ndarray, np.ndarray]:
    A = np.eye(n, dtype=complex) - np.eye(n, k=1, dtype=complex)
    A[-1, -1] = gamma
    B = np.zeros((n, n), dtype=complex)
    B[-1, :] = 1.0
    return A, B


def gen_delta(n: int, gamma: complex, graph: MetricGraph | None = None) -> BoundaryCondition:
    """Continuity at the vertex plus ``gamma psi(0) + sum_j psi_j'(0) = 0``."""
    if n < 2:
        raise ValueError(f"delta coupling needs degree >= 2, got {n}")
    A, B = _delta_matrices(n, complex(gamma))
    return BoundaryCondition(A, B, graph or star_graph(n))


def gen_delta_prime(n: int, gamma: complex, graph: MetricGraph | None = None) -> BoundaryCondition:
    """Roles of values and derivatives swapped relative to :func:`gen_delta`."""
    if n < 2:
        raise ValueError(f"delta' coupling needs degree >= 2, got {n}")
    if complex(gamma) == 0:
        raise ValueError("delta' coupling constant must be nonzero")
    A, B = _delta_matrices(n, complex(gamma))
    return BoundaryCondition(B, A, graph or star_graph(n))


def gen_counterexample(tau: float) -> BoundaryCondition:
    """Two half-lines at one vertex with ``A_tau``, ``B_tau``; ``tau in [0, pi/2]``."""
    if not 0.0 <= tau <= np.pi / 2 + 1e-15:
        raise ValueError(f"tau must lie in [0, pi/2], got {tau}")
    A = np.array([[1.0, -np.exp(1j * tau)], [0.0, 0.0]])
    B = np.array([[0.0, 0.0], [1.0, -np.exp(-1j * tau)]])
    return BoundaryCondition(A, B, star_graph(2))


def gen_dirichlet(graph: MetricGraph) -> BoundaryCondition:
    d = graph.d()
    return BoundaryCondition(np.eye(d), np.zeros((d, d)), graph)


def gen_neumann(graph: MetricGraph) -> BoundaryCondition:
    d = graph.d()
    return BoundaryCondition(np.zeros((d, d)), np.eye(d), graph)


def dirichlet_interval(length: float = np.pi) -> BoundaryCondition:
    return gen_dirichlet(interval_graph(length))


def neumann_interval(length: float = 1.0) -> BoundaryCondition:
    return gen_neumann(interval_graph(length))
