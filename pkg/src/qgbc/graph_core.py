"""Finite metric graphs, boundary-value ordering and sampled edge functions.

Boundary vectors live in ``K = K_E + K_I^- + K_I^+``: external edges first,
then the initial endpoints of the internal edges, then their terminal
endpoints.  Edges are stored in the same order (externals, then internals),
so boundary index ``j < |E| + |I|`` always sits at ``x = 0`` of edge ``j``
and index ``|E| + |I| + i`` sits at the far end of internal edge ``i``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Hashable, Iterable, Sequence

import numpy as np

INITIAL = 0
TERMINAL = 1


class GraphError(ValueError):
    pass


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class InternalEdge:
    initial: Hashable
    terminal: Hashable
    length: float


@dataclass(frozen=True)
class MetricGraph:
    """Finite metric graph ``G = (V, I, E, boundary map)`` with edge lengths.

    Internal edges are ``(initial, terminal, length)``; external edges are
    half-lines given by their initial vertex.  The orientation of an internal
    edge is taken as given; reversing it permutes boundary indices only.
    """

    vertices: tuple
    internal_edges: tuple[InternalEdge, ...] = ()
    external_edges: tuple = ()

    def __init__(self, vertices: Iterable, internal_edges: Iterable = (),
                 external_edges: Iterable = ()):
        verts = tuple(vertices)
        if len(set(verts)) != len(verts):
            raise GraphError("duplicate vertex ids")
        internals = []
        for e in internal_edges:
            edge = e if isinstance(e, InternalEdge) else InternalEdge(*e)
            length = float(edge.length)
            if not (math.isfinite(length) and length > 0):
                raise GraphError(f"internal edge length must be positive and finite, got {edge.length!r}")
            for v in (edge.initial, edge.terminal):
                if v not in verts:
                    raise GraphError(f"internal edge references unknown vertex {v!r}")
            internals.append(InternalEdge(edge.initial, edge.terminal, length))
        externals = tuple(external_edges)
        for v in externals:
            if v not in verts:
                raise GraphError(f"external edge references unknown vertex {v!r}")
        if not internals and not externals:
            raise GraphError("graph has no edges")
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "internal_edges", tuple(internals))
        object.__setattr__(self, "external_edges", externals)

    @property
    def n_external(self) -> int:
        return len(self.external_edges)

    @property
    def n_internal(self) -> int:
        return len(self.internal_edges)

    @property
    def n_edges(self) -> int:
        return self.n_external + self.n_internal

    def d(self) -> int:
        """Dimension of the boundary space, ``|E| + 2|I|``."""
        return self.n_external + 2 * self.n_internal

    @property
    def lengths(self) -> np.ndarray:
        return np.array([e.length for e in self.internal_edges], dtype=float)

    def default_R(self) -> float:
        longest = float(self.lengths.max()) if self.n_internal else 0.0
        return 20.0 * max(1.0, longest)

    def boundary_index(self, j: int) -> tuple[int, int]:
        """Map boundary index ``j`` to ``(edge, endpoint)``."""
        d = self.d()
        if not 0 <= j < d:
            raise IndexError(f"boundary index {j} out of range for d={d}")
        m = self.n_edges
        if j < m:
            return j, INITIAL
        return j - self.n_internal, TERMINAL

    def index_of(self, edge: int, endpoint: int) -> int:
        if not 0 <= edge < self.n_edges:
            raise IndexError(f"edge {edge} out of range")
        if endpoint == INITIAL:
            return edge
        if endpoint == TERMINAL and edge >= self.n_external:
            return edge + self.n_internal
        raise IndexError(f"edge {edge} has no endpoint {endpoint}")

    def endpoint_vertex(self, j: int):
        edge, endpoint = self.boundary_index(j)
        if edge < self.n_external:
            return self.external_edges[edge]
        e = self.internal_edges[edge - self.n_external]
        return e.initial if endpoint == INITIAL else e.terminal

    def edge_is_external(self, edge: int) -> bool:
        return edge < self.n_external


def star_graph(n_external: int) -> MetricGraph:
    """One vertex with ``n_external`` half-lines attached."""
    return MetricGraph(vertices=[0], external_edges=[0] * n_external)


def interval_graph(length: float) -> MetricGraph:
    """The interval ``[0, length]`` as one internal edge between two vertices."""
    return MetricGraph(vertices=[0, 1], internal_edges=[(0, 1, length)])


@dataclass(frozen=True, eq=False)
class Grid:
    """Per-edge sample points; external edges are truncated at ``R``."""

    graph: MetricGraph
    nodes: tuple[np.ndarray, ...]
    R: float

    @property
    def edge_lengths(self) -> np.ndarray:
        return np.array([x[-1] for x in self.nodes])

    @property
    def point_counts(self) -> tuple[int, ...]:
        return tuple(len(x) for x in self.nodes)

    @property
    def spacings(self) -> tuple[float, ...]:
        return tuple(float(np.max(np.diff(x))) for x in self.nodes)

    @property
    def uniform(self) -> bool:
        return all(np.allclose(np.diff(x), x[1] - x[0], rtol=1e-9, atol=0.0) for x in self.nodes)

    def sample(self, funcs: Sequence[Callable[[np.ndarray], np.ndarray]] | Callable) -> "EdgeFunction":
        """Evaluate one callable per edge (or one callable for all edges)."""
        if callable(funcs):
            funcs = [funcs] * self.graph.n_edges
        if len(funcs) != self.graph.n_edges:
            raise GridError(f"expected {self.graph.n_edges} edge functions, got {len(funcs)}")
        return EdgeFunction(self, tuple(np.asarray(f(x), dtype=complex) * np.ones_like(x) for f, x in zip(funcs, self.nodes)))

    def zeros(self) -> "EdgeFunction":
        return EdgeFunction(self, tuple(np.zeros(len(x), dtype=complex) for x in self.nodes))

    def with_nodes(self, nodes: Sequence[np.ndarray]) -> "Grid":
        return make_grid_from_nodes(self.graph, nodes, self.R)


def make_grid(graph: MetricGraph, h: float, R: float | None = None) -> Grid:
    """Uniform grid with spacing at most ``h`` on every edge.

    Each edge length is divided into ``ceil(length / h)`` equal cells, so the
    realised spacing may be slightly smaller than ``h``.
    """
    R = graph.default_R() if R is None else float(R)
    h = float(h)
    if not (math.isfinite(h) and h > 0):
        raise GridError(f"h must be positive, got {h}")
    if not (math.isfinite(R) and R > 0):
        raise GridError(f"R must be positive, got {R}")
    limits = list(graph.lengths)
    if graph.n_external:
        limits.append(R)
    if h >= min(limits):
        raise GridError(f"h={h} must be smaller than every edge length and R (min {min(limits)})")
    nodes = []
    for edge in range(graph.n_edges):
        length = R if graph.edge_is_external(edge) else graph.internal_edges[edge - graph.n_external].length
        n = max(2, int(math.ceil(length / h - 1e-9)))
        nodes.append(np.linspace(0.0, length, n + 1))
    return make_grid_from_nodes(graph, nodes, R)


def make_grid_from_nodes(graph: MetricGraph, nodes: Sequence[np.ndarray], R: float) -> Grid:
    if len(nodes) != graph.n_edges:
        raise GridError(f"expected {graph.n_edges} node arrays, got {len(nodes)}")
    frozen = []
    for edge, x in enumerate(nodes):
        x = np.array(x, dtype=float)
        if x.ndim != 1 or len(x) < 3:
            raise GridError(f"edge {edge}: need at least 3 sample points")
        if x[0] != 0.0 or np.any(np.diff(x) <= 0):
            raise GridError(f"edge {edge}: nodes must start at 0 and increase strictly")
        if not graph.edge_is_external(edge):
            length = graph.internal_edges[edge - graph.n_external].length
            if not math.isclose(x[-1], length, rel_tol=1e-12):
                raise GridError(f"edge {edge}: nodes must end at the edge length {length}")
        x.flags.writeable = False
        frozen.append(x)
    return Grid(graph, tuple(frozen), float(R))


def _inward_derivatives(x: np.ndarray, f: np.ndarray) -> tuple[complex, complex]:
    """Second-order one-sided derivatives at both ends of one edge."""
    # three-point Lagrange derivative, valid on non-uniform spacing
    h1, h2 = x[1] - x[0], x[2] - x[1]
    d0 = (-(2 * h1 + h2) / (h1 * (h1 + h2)) * f[..., 0]
          + (h1 + h2) / (h1 * h2) * f[..., 1]
          - h1 / (h2 * (h1 + h2)) * f[..., 2])
    g1, g2 = x[-1] - x[-2], x[-2] - x[-3]
    da = ((2 * g1 + g2) / (g1 * (g1 + g2)) * f[..., -1]
          - (g1 + g2) / (g1 * g2) * f[..., -2]
          + g1 / (g2 * (g1 + g2)) * f[..., -3])
    return d0, da


@dataclass(frozen=True, eq=False)
class EdgeFunction:
    """Complex samples of a function on every edge of ``grid``.

    ``values[e]`` may carry leading batch axes; the last axis runs over the
    nodes of edge ``e``.
    """

    grid: Grid
    values: tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.values) != len(self.grid.nodes):
            raise GridError("one value array per edge required")
        for edge, (x, v) in enumerate(zip(self.grid.nodes, self.values)):
            if v.shape[-1] != len(x):
                raise GridError(f"edge {edge}: {v.shape[-1]} values for {len(x)} nodes")
            if len(x) < 3:
                raise GridError(f"edge {edge}: need at least 3 samples")

    @property
    def graph(self) -> MetricGraph:
        return self.grid.graph

    def __add__(self, other: "EdgeFunction") -> "EdgeFunction":
        return EdgeFunction(self.grid, tuple(a + b for a, b in zip(self.values, other.values)))

    def __mul__(self, c) -> "EdgeFunction":
        return EdgeFunction(self.grid, tuple(c * a for a in self.values))

    __rmul__ = __mul__

    def derivative(self) -> tuple[np.ndarray, ...]:
        """Second-order finite-difference derivative on each edge."""
        return tuple(np.gradient(v, x, axis=-1, edge_order=2) for x, v in zip(self.grid.nodes, self.values))

    def second_derivative(self) -> tuple[np.ndarray, ...]:
        return tuple(_second_derivative(x, v) for x, v in zip(self.grid.nodes, self.values))

    def inner(self, other: "EdgeFunction") -> complex:
        """Discrete ``<self, other>`` (antilinear in ``self``), trapezoid rule."""
        return sum(np.trapezoid(np.conj(a) * b, x, axis=-1)
                   for x, a, b in zip(self.grid.nodes, self.values, other.values))

    def norm_sq(self) -> np.ndarray | float:
        return sum(np.trapezoid(np.abs(v) ** 2, x, axis=-1) for x, v in zip(self.grid.nodes, self.values))

    def dirichlet_energy(self) -> np.ndarray | float:
        """Discrete ``int_G |f'|^2``."""
        return sum(np.trapezoid(np.abs(dv) ** 2, x, axis=-1)
                   for x, dv in zip(self.grid.nodes, self.derivative()))


def fd_weights(x: np.ndarray, x0: float, order: int) -> np.ndarray:
    """Finite-difference weights for the ``order``-th derivative at ``x0``."""
    n = len(x)
    dx = (np.asarray(x, dtype=float) - x0)
    V = np.vander(dx, n, increasing=True).T
    rhs = np.zeros(n)
    rhs[order] = math.factorial(order)
    return np.linalg.solve(V, rhs)


def _second_derivative(x: np.ndarray, v: np.ndarray) -> np.ndarray:
    out = np.empty_like(v)
    hl = x[1:-1] - x[:-2]
    hr = x[2:] - x[1:-1]
    out[..., 1:-1] = 2 * (v[..., :-2] / (hl * (hl + hr)) - v[..., 1:-1] / (hl * hr) + v[..., 2:] / (hr * (hl + hr)))
    if len(x) >= 4:
        out[..., 0] = v[..., :4] @ fd_weights(x[:4], x[0], 2)
        out[..., -1] = v[..., -4:] @ fd_weights(x[-4:], x[-1], 2)
    else:
        out[..., 0] = out[..., 1]
        out[..., -1] = out[..., -2]
    return out


def trace(f: EdgeFunction) -> tuple[np.ndarray, np.ndarray]:
    """Boundary values and inward derivatives ``(psi, psi_prime)``.

    ``psi_prime`` holds ``f'(0)`` at initial endpoints and ``-f'(a)`` at
    terminal endpoints.  Leading batch axes of ``f.values`` are preserved.
    """
    graph = f.graph
    for edge, x in enumerate(f.grid.nodes):
        if len(x) < 3:
            raise GridError(f"edge {edge}: trace needs at least 3 samples")
    m, ni = graph.n_edges, graph.n_internal
    batch = f.values[0].shape[:-1]
    psi = np.zeros(batch + (graph.d(),), dtype=complex)
    dpsi = np.zeros_like(psi)
    for edge, (x, v) in enumerate(zip(f.grid.nodes, f.values)):
        d0, da = _inward_derivatives(x, v)
        psi[..., edge] = v[..., 0]
        dpsi[..., edge] = d0
        if not graph.edge_is_external(edge):
            psi[..., edge + ni] = v[..., -1]
            dpsi[..., edge + ni] = -da
    return psi, dpsi


def trace_matrices(grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """Linear maps from stacked node values to ``psi`` and ``psi_prime``."""
    graph = grid.graph
    offsets = np.cumsum([0] + [len(x) for x in grid.nodes])
    N, d, ni = offsets[-1], graph.d(), graph.n_internal
    Tv = np.zeros((d, N))
    Td = np.zeros((d, N))
    for edge, x in enumerate(grid.nodes):
        o = offsets[edge]
        e3 = np.eye(3)
        d0, _ = _inward_derivatives(x[:3], e3)
        Tv[edge, o] = 1.0
        Td[edge, o:o + 3] = d0
        if not graph.edge_is_external(edge):
            _, da = _inward_derivatives(x[-3:], e3)
            Tv[edge + ni, offsets[edge + 1] - 1] = 1.0
            Td[edge + ni, offsets[edge + 1] - 3:offsets[edge + 1]] = -da
    return Tv, Td
