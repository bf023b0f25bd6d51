"""Quadratic forms, numerical-range sampling and the non-accretivity witness.

For ``psi`` in the operator domain,

    <psi, -Delta psi> = int_G |psi'|^2 + <psi_bnd, psi_bnd'>_K,

and on the closed form domain ``P psi_bnd = 0`` the boundary term becomes
``-<P^perp psi_bnd, L P^perp psi_bnd>``.  When ``Q A P^perp != 0`` the
sequence built by :func:`build_witness` stays in the operator domain with
bounded norm while the real part of its Rayleigh quotient tends to
``-infinity``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm, null_space

from .boundary_conditions import (
    BoundaryCondition,
    NormalizedBC,
    PreconditionError,
    check_assumption_A,
    check_max_rank,
    compute_projectors,
    normalize,
    normalizing_matrix,
)
from .graph_core import EdgeFunction, Grid, GridError, make_grid_from_nodes, trace, trace_matrices

TOL_BC = 1e-3


class BoundaryResidualError(ValueError):
    pass


class DomainError(ValueError):
    pass


class ProjectionError(RuntimeError):
    pass


class NoAlphaError(RuntimeError):
    pass


@dataclass(frozen=True)
class FormValue:
    dirichlet_energy: np.ndarray | float
    boundary_term: np.ndarray | complex
    norm_sq: np.ndarray | float

    @property
    def total(self):
        return self.dirichlet_energy + self.boundary_term

    @property
    def rayleigh(self):
        return self.total / self.norm_sq


def quadratic_form(f: EdgeFunction, bc: BoundaryCondition, tol_bc: float = TOL_BC) -> FormValue:
    """``int |f'|^2 + <f_bnd, f_bnd'>`` for ``f`` satisfying ``bc``.

    ``tol_bc`` bounds the relative boundary residual; finite-difference
    traces are only second-order accurate, hence the loose default.
    """
    psi, dpsi = trace(f)
    res = np.max(bc.relative_residual(psi, dpsi))
    if res > tol_bc:
        raise BoundaryResidualError(f"boundary residual {res:.3e} exceeds tol_bc={tol_bc:.1e}")
    return FormValue(f.dirichlet_energy(), np.sum(np.conj(psi) * dpsi, axis=-1), f.norm_sq())


def quadratic_form_normalized(f: EdgeFunction, nbc: NormalizedBC, tol: float = 1e-8) -> FormValue:
    """``int |f'|^2 - <P^perp f_bnd, L P^perp f_bnd>`` on ``P f_bnd = 0``."""
    psi, _ = trace(f)
    Pp = nbc.P_perp
    viol = np.max(np.linalg.norm(psi @ nbc.P.T, axis=-1) / np.maximum(np.linalg.norm(psi, axis=-1), 1e-300))
    if viol > tol and np.max(np.linalg.norm(psi @ nbc.P.T, axis=-1)) > tol:
        raise DomainError(f"P psi != 0 (relative size {viol:.3e}); f is outside the form domain")
    v = psi @ Pp.T
    bterm = -np.sum(np.conj(v) * (v @ nbc.L.T), axis=-1)
    return FormValue(f.dirichlet_energy(), bterm, f.norm_sq())


def direct_form(f: EdgeFunction) -> complex:
    """Discrete ``<f, -f''>`` without integrating by parts."""
    return -sum(np.trapezoid(np.conj(v) * d2, x, axis=-1)
                for x, v, d2 in zip(f.grid.nodes, f.values, f.second_derivative()))


def trace_inequality_check(x: np.ndarray, values: np.ndarray, l: float) -> tuple[float, float]:
    """``(|f(0)|^2, (2/l)||f||^2 + l ||f'||^2)`` for one edge sampled at ``x``."""
    x = np.asarray(x, dtype=float)
    if not (0 < l <= x[-1] * (1 + 1e-12)):
        raise ValueError(f"l must satisfy 0 < l <= {x[-1]}, got {l}")
    v = np.asarray(values)
    dv = np.gradient(v, x, edge_order=2)
    lhs = float(np.abs(v[0]) ** 2)
    rhs = float(2.0 / l * np.trapezoid(np.abs(v) ** 2, x) + l * np.trapezoid(np.abs(dv) ** 2, x))
    return lhs, rhs


# -- numerical range --------------------------------------------------------

def _hermite_shapes(s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Value and slope shape functions on ``s`` (distance from the endpoint)."""
    w = s[-1]
    t = s / w
    return 1 - 3 * t ** 2 + 2 * t ** 3, w * (t - 2 * t ** 2 + t ** 3)


def _correction_basis(grid: Grid, width: int = 6) -> np.ndarray:
    """Columns: per boundary index a value shape and a slope shape over the
    ``width`` samples nearest that endpoint, in stacked node coordinates."""
    graph = grid.graph
    offsets = np.cumsum([0] + [len(x) for x in grid.nodes])
    d = graph.d()
    Phi = np.zeros((offsets[-1], 2 * d))
    for j in range(d):
        edge, endpoint = graph.boundary_index(j)
        x = grid.nodes[edge]
        k = min(width, len(x))
        if endpoint == 0:
            idx = np.arange(offsets[edge], offsets[edge] + k)
            s = x[:k] - x[0]
        else:
            idx = np.arange(offsets[edge + 1] - 1, offsets[edge + 1] - 1 - k, -1)
            s = x[-1] - x[::-1][:k]
        val, der = _hermite_shapes(s)
        Phi[idx, 2 * j] = val
        Phi[idx, 2 * j + 1] = der
    return Phi


def _random_edge_samples(rng: np.random.Generator, x: np.ndarray, external: bool, n: int) -> np.ndarray:
    length = x[-1]
    h = x[1] - x[0]
    K = 6
    k = np.arange(K)
    freq = (k + 0.5) * np.pi / length if external else k * np.pi / length
    coef = (rng.standard_normal((n, K)) + 1j * rng.standard_normal((n, K))) / (1 + k)
    coef *= rng.random((n, K)) < rng.uniform(0.2, 1.0, (n, 1))
    vals = coef @ np.cos(np.outer(freq, x))
    lo, hi = math.log(2 * h), math.log(length / 2)
    window = np.cos(0.5 * np.pi * x / length) if external else np.ones_like(x)
    for end in ((0,) if external else (0, 1)):
        s = x if end == 0 else length - x
        scale = np.exp(rng.uniform(lo, hi, (n, 1)))
        amp = (rng.standard_normal((n, 1)) + 1j * rng.standard_normal((n, 1))) * rng.exponential(2.0, (n, 1))
        vals = vals + amp * np.exp(-s / scale) * window
    return vals


@dataclass(frozen=True)
class NumericalRangeSample:
    cloud: np.ndarray
    max_bc_residual: float
    seed: int

    def half_plane(self) -> float:
        """Smallest ``C >= 0`` with ``Re z >= -C`` on the cloud."""
        return float(max(0.0, -np.min(self.cloud.real)))

    def sector(self, C: float) -> float:
        """Smallest ``k`` with ``|Im z| <= k (Re z + C)`` on the cloud."""
        shift = self.cloud.real + C
        if np.any(shift <= 0):
            return math.inf
        return float(np.max(np.abs(self.cloud.imag) / shift))


def sample_numerical_range(bc: BoundaryCondition, grid: Grid, n_samples: int, seed: int = 42,
                           batch: int = 1000, tol_bc: float = 1e-9) -> NumericalRangeSample:
    """Rayleigh quotients of random discrete functions satisfying ``bc``.

    Random smooth functions are corrected on the six samples nearest each
    endpoint (value and slope shape functions, least-squares coefficients)
    so that the discrete traces satisfy ``A psi + B psi' = 0``.
    """
    if not check_max_rank(bc):
        raise PreconditionError("sample_numerical_range: (A|B) does not have maximal rank")
    graph = grid.graph
    rng = np.random.default_rng(seed)
    Tv, Td = trace_matrices(grid)
    Phi = _correction_basis(grid)
    M = bc.A @ Tv @ Phi + bc.B @ Td @ Phi
    Mplus = np.linalg.pinv(M)
    offsets = np.cumsum([0] + [len(x) for x in grid.nodes])
    out = []
    worst = 0.0
    remaining = n_samples
    while remaining > 0:
        nb = min(batch, remaining)
        remaining -= nb
        stacked = np.concatenate([_random_edge_samples(rng, x, graph.edge_is_external(e), nb)
                                  for e, x in enumerate(grid.nodes)], axis=1)
        r = stacked @ (bc.A @ Tv + bc.B @ Td).T
        stacked = stacked - (r @ Mplus.T) @ Phi.T
        f = EdgeFunction(grid, tuple(stacked[:, offsets[e]:offsets[e + 1]] for e in range(graph.n_edges)))
        psi, dpsi = trace(f)
        res = float(np.max(bc.relative_residual(psi, dpsi)))
        worst = max(worst, res)
        if res > tol_bc:
            raise ProjectionError(f"could not meet the boundary conditions on this grid (residual {res:.3e})")
        out.append(quadratic_form(f, bc, tol_bc=tol_bc).rayleigh)
    return NumericalRangeSample(np.concatenate(out), worst, seed)


def _min_length(grid: Grid) -> float:
    return float(np.min(grid.edge_lengths))


def _positive_part(L: np.ndarray) -> float:
    """Largest eigenvalue of ``Re L``, clipped to 0 below round-off."""
    lam = float(np.linalg.eigvalsh(0.5 * (L + L.conj().T))[-1])
    return lam if lam > 1e-12 * (1 + np.linalg.norm(L)) else 0.0


def half_plane_bound(nbc: NormalizedBC, grid: Grid) -> float:
    """A priori ``C`` with ``Re <u, T u> >= -C ||u||^2`` from the trace estimate.

    With ``lam = max(0, max eig Re L)`` and ``l = min(shortest edge, 1/(2 lam))``
    every endpoint obeys ``|u(0)|^2 <= (2/l)||u||^2 + l||u'||^2``; each edge
    has at most two endpoints, so ``C = 4 lam / l`` suffices.
    """
    lam = _positive_part(nbc.L)
    if lam == 0.0:
        return 0.0
    l = min(_min_length(grid), 1.0 / (2 * lam))
    return 4 * lam / l


def sector_bound(nbc: NormalizedBC, grid: Grid) -> tuple[float, float]:
    """A priori vertex ``C`` and slope ``k = 1`` with ``|Im z| <= k (Re z + C)``."""
    L = nbc.L
    lam = _positive_part(L)
    mu = float(np.linalg.norm(0.5 * (L - L.conj().T), 2))
    if lam + mu == 0.0:
        return 0.0, 1.0
    l = min(_min_length(grid), 1.0 / (2 * (lam + mu)))
    return 4 * (lam + mu) / l, 1.0


# -- witness sequence -------------------------------------------------------

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(40)
_GL_NODES = 0.5 * (_GL_NODES + 1)
_GL_WEIGHTS = 0.5 * _GL_WEIGHTS
# int_0^1 h00^2 and int_0^1 (h00')^2 for h00 = 1 - 3t^2 + 2t^3
_H00_SQ = 13.0 / 35.0
_DH00_SQ = 6.0 / 5.0


@dataclass(frozen=True, eq=False)
class WitnessEntry:
    n: int
    H: np.ndarray
    norm_H: float
    log_a: float
    a: float
    b: float
    c: float
    gamma: np.ndarray
    dirichlet_energy: float
    boundary_term: complex
    norm_sq: float
    bc_residual: float

    @property
    def rayleigh(self) -> complex:
        return (self.dirichlet_energy + self.boundary_term) / self.norm_sq

    @property
    def norm(self) -> float:
        return math.sqrt(self.norm_sq)

    def profile(self, s: np.ndarray, alpha: np.ndarray) -> np.ndarray:
        """``Phi_H(s) alpha`` for distances ``s`` from the vertex, shape ``(len(s), d)``."""
        s = np.asarray(s, dtype=float)
        out = np.zeros((len(s), len(alpha)), dtype=complex)
        a, b, c, n, H = self.a, self.b, self.c, self.n, self.H
        m1 = s <= a
        for i in np.nonzero(m1)[0]:
            out[i] = expm(H * s[i]) @ alpha
        m2 = (s > a) & (s < b)
        if np.any(m2):
            G = H @ expm(H * a) @ alpha
            tau = (s[m2] - b) / (a - b)
            out[m2] = np.outer((a - b) * tau ** (n + 1) / (n + 1), G) + (self.gamma @ alpha)
        m3 = (s >= b) & (s < c)
        t = (s[m3] - b) / (c - b)
        out[m3] = np.outer(1 - 3 * t ** 2 + 2 * t ** 3, self.gamma @ alpha)
        return out


@dataclass(frozen=True, eq=False)
class WitnessSequence:
    bc: BoundaryCondition
    alpha: np.ndarray
    P: np.ndarray
    A_prime: np.ndarray
    entries: list[WitnessEntry] = field(default_factory=list)

    @property
    def ns(self) -> np.ndarray:
        return np.array([e.n for e in self.entries])

    @property
    def rayleigh(self) -> np.ndarray:
        return np.array([e.rayleigh for e in self.entries])

    @property
    def norms(self) -> np.ndarray:
        return np.array([e.norm for e in self.entries])

    def table(self) -> list[dict]:
        return [{"n": e.n, "re_rayleigh": float(e.rayleigh.real), "im_rayleigh": float(e.rayleigh.imag),
                 "norm": e.norm, "bc_residual": e.bc_residual} for e in self.entries]

    def sample(self, n: int, R: float | None = None, points: int = 200) -> EdgeFunction:
        """``u_n`` on a graded grid (at least 50 points inside ``[0, b_n]``).

        Only possible while ``a_n`` is a normal double; the schedule shrinks
        like ``exp(-2||H_n||)``.
        """
        entry = next(e for e in self.entries if e.n == n)
        if entry.a < 1e-290:
            raise GridError(f"a_n = exp({entry.log_a:.1f}) underflows; u_{n} cannot be sampled in double precision")
        graph = self.bc.graph
        R = graph.default_R() if R is None else R
        local = np.unique(np.concatenate([
            np.linspace(0, entry.a, 60),
            np.linspace(entry.a, entry.b, max(points, 60)),
            entry.b + (entry.c - entry.b) * np.linspace(0, 1, points),
        ]))
        prof = entry.profile(local, self.alpha)
        nodes, values = [], []
        for edge in range(graph.n_edges):
            length = R if graph.edge_is_external(edge) else graph.internal_edges[edge - graph.n_external].length
            tail = np.linspace(entry.c, length - (0 if graph.edge_is_external(edge) else entry.c), 40)
            j0 = graph.index_of(edge, 0)
            if graph.edge_is_external(edge):
                x = np.concatenate([local, tail[1:]])
                v = np.concatenate([prof[:, j0], np.zeros(len(tail) - 1)])
            else:
                j1 = graph.index_of(edge, 1)
                x = np.concatenate([local, tail[1:-1], length - local[::-1]])
                v = np.concatenate([prof[:, j0], np.zeros(len(tail) - 2), prof[::-1, j1]])
            nodes.append(x)
            values.append(v)
        grid = make_grid_from_nodes(graph, nodes, R)
        return EdgeFunction(grid, tuple(values))


def witness_alpha(P: np.ndarray, A_prime: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    """Unit ``alpha`` in ``Ker(P A')`` maximizing ``||P alpha||``."""
    N = null_space(P @ A_prime, rcond=1e-10)
    if N.shape[1] == 0:
        raise NoAlphaError("Ker(P A') is trivial")
    _, s, Vh = np.linalg.svd(P @ N)
    if s[0] <= tol:
        raise NoAlphaError(f"every alpha in Ker(P A') has ||P alpha|| <= {s[0]:.2e}; no witness")
    alpha = N @ Vh[0].conj()
    return alpha / np.linalg.norm(alpha)


def _witness_entry(bc, alpha, P, A_prime, n, c) -> WitnessEntry:
    d = bc.d
    Pp = np.eye(d) - P
    H = -(Pp @ A_prime + n * P)
    norm_H = float(np.linalg.norm(H, 2))
    log_a = -2 * norm_H - 2 * math.log(norm_H)
    a = math.exp(log_a)
    b = 2 * a
    Ea = expm(H * a)
    gamma = (np.eye(d) + a / (n + 1) * H) @ Ea
    # [0, a]
    e1 = 0.0
    n1 = 0.0
    if a > 0:
        vals = np.array([expm(H * a * s) @ alpha for s in _GL_NODES])
        e1 = a * float(_GL_WEIGHTS @ np.sum(np.abs(vals @ H.T) ** 2, axis=1))
        n1 = a * float(_GL_WEIGHTS @ np.sum(np.abs(vals) ** 2, axis=1))
    # (a, b): p' = H e^{Ha} tau^n with tau = (x - b)/(a - b)
    G = H @ Ea @ alpha
    ga = gamma @ alpha
    e2 = (b - a) * float(np.vdot(G, G).real) / (2 * n + 1)
    tau = _GL_NODES
    pv = np.outer((a - b) * tau ** (n + 1) / (n + 1), G) + ga
    n2 = (b - a) * float(_GL_WEIGHTS @ np.sum(np.abs(pv) ** 2, axis=1))
    # [b, c): cubic Hermite from (gamma, 0) to (0, 0)
    gg = float(np.vdot(ga, ga).real)
    e3 = gg * _DH00_SQ / (c - b)
    n3 = gg * _H00_SQ * (c - b)
    psi, dpsi = alpha, H @ alpha
    res = float(bc.residual(psi, dpsi) / (np.linalg.norm(psi) + np.linalg.norm(dpsi)))
    return WitnessEntry(n=n, H=H, norm_H=norm_H, log_a=log_a, a=a, b=b, c=c, gamma=gamma,
                        dirichlet_energy=e1 + e2 + e3, boundary_term=complex(np.vdot(psi, dpsi)),
                        norm_sq=n1 + n2 + n3, bc_residual=res)


def witness_support(bc: BoundaryCondition, R: float | None = None) -> float:
    """The constant ``c_n``: ``min(1, R/2)``, kept below half of every internal edge."""
    graph = bc.graph
    R = graph.default_R() if R is None else R
    c = min(1.0, R / 2)
    if graph.n_internal:
        c = min(c, 0.45 * float(graph.lengths.min()))
    return c


def build_witness(bc: BoundaryCondition, n_max: int = 20, ns=None, R: float | None = None) -> WitnessSequence:
    """Domain functions ``u_n`` with ``Re <u_n, -Delta u_n> / ||u_n||^2 -> -inf``.

    Requires maximal rank and ``Q A P^perp != 0``.  With ``A' = C A`` and
    ``B' = P^perp`` the normalized pair, ``alpha`` satisfies ``P A' alpha = 0``
    and ``P alpha != 0``; ``u_n`` near every endpoint is the matching
    component of ``Phi_{H_n}(x) alpha`` with ``H_n = -(P^perp A' + n P)``,
    ``a_n = exp(-2||H_n||)/||H_n||^2``, ``b_n = 2 a_n`` and fixed ``c_n``.
    Integrals are evaluated piecewise in closed form or by Gauss-Legendre
    quadrature in rescaled variables, so any ``n`` is admissible.
    """
    if not check_max_rank(bc):
        raise PreconditionError("build_witness: (A|B) does not have maximal rank")
    if check_assumption_A(bc):
        raise PreconditionError("build_witness: Q A P^perp = 0, the operator is quasi-m-accretive "
                                "and no witness exists")
    P, _ = compute_projectors(bc.B)
    A_prime = normalizing_matrix(bc) @ bc.A
    alpha = witness_alpha(P, A_prime)
    c = witness_support(bc, R)
    ns = range(1, n_max + 1) if ns is None else ns
    entries = [_witness_entry(bc, alpha, P, A_prime, int(n), c) for n in ns]
    return WitnessSequence(bc, alpha, P, A_prime, entries)


def witness_start(bc: BoundaryCondition, min_norm_H: float = 8.0) -> int:
    """Smallest power of two ``n`` with ``||H_n|| >= min_norm_H``.

    Below it ``a_n ||H_n||`` is not negligible and the quotients may rise
    before the ``-n ||P alpha||^2`` drift takes over.
    """
    P, _ = compute_projectors(bc.B)
    A_prime = normalizing_matrix(bc) @ bc.A
    Pp = np.eye(bc.d) - P
    n = 1
    while np.linalg.norm(Pp @ A_prime + n * P, 2) < min_norm_H:
        n *= 2
    return n


def witness_until(bc: BoundaryCondition, threshold: float = -1e3, n_start: int | None = None,
                  n_limit: int = 10 ** 7, R: float | None = None) -> WitnessSequence:
    """Witness evaluated at ``n = n_start * 2^k`` until ``Re rayleigh < threshold``.

    ``n_start`` defaults to :func:`witness_start`.
    """
    n = witness_start(bc) if n_start is None else n_start
    seq = build_witness(bc, ns=[n], R=R)
    c = witness_support(bc, R)
    while seq.entries[-1].rayleigh.real >= threshold:
        n *= 2
        if n > n_limit:
            break
        seq.entries.append(_witness_entry(bc, seq.alpha, seq.P, seq.A_prime, n, c))
    return seq
