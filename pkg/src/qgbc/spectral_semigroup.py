"""Discrete Laplacians on metric graphs, spectra and heat evolution.

Two assemblies share one representation ``T_h = M^{-1} K`` on a reduced
coordinate space (node values with the constraints eliminated):

``form``
    For quasi-m-accretive conditions.  ``K`` discretizes the closed form
    ``int |u'|^2 - <P^perp u, L P^perp u>`` with piecewise-linear elements
    and lumped mass ``M``; ``P u = 0`` and the Dirichlet caps at ``R`` are
    eliminated.  Interior rows of ``M^{-1} K`` are the 3-point stencil and
    ``Re <u, T_h u>_M`` equals the discrete real-part form, so the discrete
    semigroup contracts exactly when the discrete real part is nonnegative.

``collocation``
    For any maximal-rank pair.  Node values are constrained by
    ``A psi + B psi' = 0`` with one-sided 3-point derivatives, and the
    full-grid stencil is compressed onto that constraint space.  Used for
    forced runs when ``Q A P^perp != 0``.  When the continuous spectrum is
    all of C (two half-lines with ``tau = 0``), any discretization treating
    both edges alike inherits a singular or defective pencil, so eigenvalues
    near the defect are set by rounding and carry no information.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .boundary_conditions import (
    BoundaryCondition,
    NormalizedBC,
    PreconditionError,
    check_assumption_A,
    check_max_rank,
    normalize,
    real_part,
)
from .forms_numrange import _positive_part, half_plane_bound
from .graph_core import EdgeFunction, Grid, GridError, fd_weights, make_grid, trace_matrices

MIN_POINTS = 5
Scheme = Literal["form", "collocation"]


class SolveError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class DiscreteOperator:
    grid: Grid
    bc: BoundaryCondition
    scheme: str
    K: np.ndarray
    M: np.ndarray
    Z: np.ndarray

    @property
    def size(self) -> int:
        return self.K.shape[0]

    @property
    def sparse(self) -> bool:
        return sp.issparse(self.K)

    def dense(self) -> tuple[np.ndarray, np.ndarray]:
        if self.sparse:
            return self.K.toarray(), self.M.toarray()
        return self.K, self.M

    @property
    def T(self) -> np.ndarray:
        K, M = self.dense()
        return np.linalg.solve(M, K)

    def hermitian_part(self):
        return 0.5 * (self.K + self.K.conj().T)

    def to_function(self, c: np.ndarray) -> EdgeFunction:
        v = self.Z @ c
        offsets = np.cumsum([0] + [len(x) for x in self.grid.nodes])
        return EdgeFunction(self.grid, tuple(v[..., offsets[e]:offsets[e + 1]] for e in range(len(offsets) - 1)))

    def project(self, f: EdgeFunction) -> np.ndarray:
        """Reduced coordinates of the lumped-mass orthogonal projection of ``f``."""
        if f.grid is not self.grid and f.grid.point_counts != self.grid.point_counts:
            raise GridError("function lives on a different grid")
        v = np.concatenate(f.values, axis=-1)
        rhs = self.Z.conj().T @ (lumped_weights(self.grid) * v)
        return spla.spsolve(self.M.tocsc(), rhs) if self.sparse else np.linalg.solve(self.M, rhs)

    def from_function(self, f: EdgeFunction, tol: float = 1e-8) -> np.ndarray:
        """Reduced coordinates of ``f``; ``f`` must satisfy the eliminated constraints."""
        c = self.project(f)
        v = np.concatenate(f.values, axis=-1)
        miss = np.linalg.norm(self.Z @ c - v) / max(np.linalg.norm(v), 1e-300)
        if np.linalg.norm(v) > 0 and miss > tol:
            raise PreconditionError(f"initial state violates the boundary conditions (relative defect {miss:.2e})")
        return c

    def norm(self, c: np.ndarray) -> np.ndarray:
        Mc = (self.M @ np.asarray(c).T).T
        return np.sqrt(np.maximum(np.real(np.sum(np.conj(c) * Mc, axis=-1)), 0.0))

    def eigenvalues(self, hermitian: bool = False) -> np.ndarray:
        """All eigenvalues of ``T_h`` (dense solve), sorted by real part.

        ``M`` is positive definite, so ``T_h`` is similar to
        ``C^{-1} K C^{-*}`` with ``M = C C^*``.  ``hermitian=True`` assumes
        ``K`` Hermitian and uses the symmetric solver.
        """
        K, M = self.dense()
        C = sla.cholesky(M, lower=True)
        X = sla.solve_triangular(C, K, lower=True)
        S = sla.solve_triangular(C, X.conj().T, lower=True).conj().T
        if hermitian:
            w = sla.eigvalsh(0.5 * (S + S.conj().T)).astype(complex)
        else:
            w = sla.eigvals(S)
        return w[np.lexsort((w.imag, w.real))]

    def min_real_eigenvalue(self) -> complex:
        return complex(self.eigenvalues()[0])

    def min_hermitian_eigenvalue(self, lower: float | None = None) -> float:
        """Bottom of ``Re <u, T_h u>_M / <u, u>_M``.

        Large sparse operators use shift-invert Lanczos below ``lower``, a
        lower bound for the spectrum taken from the trace estimate when not
        given (the dense solver is used otherwise).
        """
        Kh = self.hermitian_part()
        if lower is None and self.scheme == "form":
            lower = -2.0 * half_plane_bound(real_part(self.bc), self.grid)
        if self.sparse and self.size > 400 and lower is not None:
            sigma = lower - 1.0
            # fixed start vector keeps the result bit-for-bit reproducible
            v0 = np.ones(self.size, dtype=Kh.dtype)
            w = spla.eigsh(Kh.tocsc(), k=1, M=self.M.tocsc(), sigma=sigma, which="LM", v0=v0,
                           return_eigenvectors=False)
            return float(np.min(w))
        K, M = self.dense()
        Kh = 0.5 * (K + K.conj().T)
        return float(sla.eigh(Kh, M, eigvals_only=True, subset_by_index=[0, 0])[0])


def lumped_weights(grid: Grid) -> np.ndarray:
    """Trapezoid weights of every node, stacked edge by edge."""
    out = []
    for x in grid.nodes:
        w = np.zeros(len(x))
        dx = np.diff(x)
        w[:-1] += dx / 2
        w[1:] += dx / 2
        out.append(w)
    return np.concatenate(out)


def _endpoint_nodes(grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """Stacked node index of each boundary index, and of each external cap."""
    graph = grid.graph
    offsets = np.cumsum([0] + [len(x) for x in grid.nodes])
    ends = np.array([offsets[e] if ep == 0 else offsets[e + 1] - 1
                     for e, ep in map(graph.boundary_index, range(graph.d()))], dtype=int)
    caps = np.array([offsets[e + 1] - 1 for e in range(graph.n_external)], dtype=int)
    return ends, caps


def _stiffness(grid: Grid) -> sp.csr_matrix:
    N = sum(len(x) for x in grid.nodes)
    rows, cols, vals = [], [], []
    o = 0
    for x in grid.nodes:
        inv = 1.0 / np.diff(x)
        i = np.arange(len(x) - 1) + o
        rows += [i, i + 1, i, i + 1]
        cols += [i, i + 1, i + 1, i]
        vals += [inv, inv, -inv, -inv]
        o += len(x)
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(N, N))


def _check_grid(grid: Grid) -> None:
    for e, n in enumerate(grid.point_counts):
        if n < MIN_POINTS:
            raise GridError(f"edge {e} has {n} points; at least {MIN_POINTS} are required")


def assemble_form(grid: Grid, nbc: NormalizedBC, bc: BoundaryCondition) -> DiscreteOperator:
    _check_grid(grid)
    N = sum(grid.point_counts)
    ends, caps = _endpoint_nodes(grid)
    Pp = nbc.P_perp
    U, s, _ = np.linalg.svd(Pp)
    V = U[:, s > 0.5]
    fixed = np.zeros(N, dtype=bool)
    fixed[ends] = True
    fixed[caps] = True
    interior = np.nonzero(~fixed)[0]
    ni, r = len(interior), V.shape[1]
    Zi = sp.csr_matrix((np.ones(ni), (interior, np.arange(ni))), shape=(N, ni + r))
    Ze = sp.csr_matrix((V.ravel(), (np.repeat(ends, r), np.tile(np.arange(ni, ni + r), len(ends)))),
                       shape=(N, ni + r))
    Z = (Zi + Ze).tocsr()
    E = sp.csr_matrix((np.ones(len(ends)), (np.arange(len(ends)), ends)), shape=(grid.graph.d(), N))
    K_full = _stiffness(grid) - E.T @ sp.csr_matrix(nbc.L) @ E
    W = sp.diags(lumped_weights(grid))
    K = (Z.conj().T @ K_full @ Z).tocsc()
    M = (Z.conj().T @ W @ Z).tocsc()
    return DiscreteOperator(grid, bc, "form", K, M, Z)


def _collocation_stencil(grid: Grid) -> np.ndarray:
    """``-d^2/dx^2`` on every node: 3-point inside, 4-point one-sided at the ends."""
    N = sum(grid.point_counts)
    S = np.zeros((N, N))
    o = 0
    for x in grid.nodes:
        n = len(x)
        for k in range(1, n - 1):
            S[o + k, o + k - 1:o + k + 2] = -fd_weights(x[k - 1:k + 2], x[k], 2)
        S[o, o:o + 4] = -fd_weights(x[:4], x[0], 2)
        S[o + n - 1, o + n - 4:o + n] = -fd_weights(x[-4:], x[-1], 2)
        o += n
    return S


def assemble_collocation(grid: Grid, bc: BoundaryCondition) -> DiscreteOperator:
    _check_grid(grid)
    N = sum(grid.point_counts)
    Tv, Td = trace_matrices(grid)
    _, caps = _endpoint_nodes(grid)
    G = np.vstack([bc.A @ Tv + bc.B @ Td, np.eye(N)[caps]])
    Z = sla.null_space(G)
    W = lumped_weights(grid)
    S = _collocation_stencil(grid)
    K = Z.conj().T @ (W[:, None] * (S @ Z))
    M = Z.conj().T @ (W[:, None] * Z)
    return DiscreteOperator(grid, bc, "collocation", K, M, Z)


def assemble(bc: BoundaryCondition, h: float | None = None, R: float | None = None,
             grid: Grid | None = None, scheme: Scheme | None = None) -> DiscreteOperator:
    """Discrete ``-Delta(A, B)``.

    ``scheme`` defaults to ``"form"`` when ``Q A P^perp = 0`` and to
    ``"collocation"`` otherwise.
    """
    if not check_max_rank(bc):
        raise PreconditionError("assemble: (A|B) does not have maximal rank")
    if grid is None:
        if h is None:
            raise ValueError("either h or grid is required")
        grid = make_grid(bc.graph, h, R)
    qma = check_assumption_A(bc)
    if scheme is None:
        scheme = "form" if qma else "collocation"
    if scheme == "form":
        if not qma:
            raise PreconditionError("the form scheme needs Q A P^perp = 0")
        return assemble_form(grid, normalize(bc), bc)
    if scheme == "collocation":
        return assemble_collocation(grid, bc)
    raise ValueError(f"unknown scheme {scheme!r}")


def suggested_R(bc: BoundaryCondition, decay: float = 1e-8) -> float:
    """Truncation length with ``exp(-kappa R) < decay`` for the largest
    bound-state rate ``kappa`` suggested by ``Re L``; never below the graph default."""
    R = bc.graph.default_R()
    if not bc.graph.n_external:
        return R
    try:
        L = normalize(bc).L
    except PreconditionError:
        return R
    kappa = _positive_part(L)
    if kappa > 0:
        R = max(R, math.log(1.0 / decay) / kappa)
    return R


@dataclass(frozen=True)
class GrowthBound:
    omega: float
    omega_half: float
    omega_extrapolated: float
    error_estimate: float
    h: float
    R: float


def growth_bound(bc: BoundaryCondition, h: float = 0.05, R: float | None = None) -> GrowthBound:
    """Bottom of the spectrum of the self-adjoint real part ``-Delta(P + Re L, P^perp)``.

    ``omega`` is the value at spacing ``h``; a second solve at ``h/2`` gives
    the Richardson extrapolation and its error estimate.
    """
    if not (check_max_rank(bc) and check_assumption_A(bc)):
        raise PreconditionError("growth bound undefined: the operator is not quasi-m-accretive")
    R = suggested_R(bc) if R is None else R
    rp = real_part(bc)
    sa = rp.rebuild(bc.graph)
    w = []
    for hh in (h, h / 2):
        grid = make_grid(bc.graph, hh, R)
        w.append(assemble_form(grid, rp, sa).min_hermitian_eigenvalue())
    ext = (4 * w[1] - w[0]) / 3
    return GrowthBound(omega=w[0], omega_half=w[1], omega_extrapolated=ext,
                       error_estimate=abs(w[1] - w[0]) / 3, h=h, R=R)


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    norms: np.ndarray
    omega_used: float = float("nan")
    snapshots: list | None = None
    final: np.ndarray | None = field(default=None, repr=False)


def evolve_operator(op: DiscreteOperator, c0: np.ndarray, dt: float, n_steps: int,
                    keep_snapshots: bool = False) -> Trajectory:
    """Crank-Nicolson ``(M + dt/2 K) c_{k+1} = (M - dt/2 K) c_k``."""
    lhs = op.M + 0.5 * dt * op.K
    rhs = op.M - 0.5 * dt * op.K
    try:
        if op.sparse:
            lu = spla.splu(sp.csc_matrix(lhs, dtype=complex))
            solve = lu.solve
        else:
            lu = sla.lu_factor(lhs, check_finite=True)
            solve = lambda b: sla.lu_solve(lu, b)  # noqa: E731
    except (ValueError, RuntimeError, sla.LinAlgError) as exc:
        raise SolveError(f"Crank-Nicolson matrix could not be factorized at step 0: {exc}") from exc
    c = np.asarray(c0, dtype=complex)
    norms = [float(op.norm(c))]
    snaps = [c.copy()] if keep_snapshots else None
    for k in range(n_steps):
        c = solve(rhs @ c)
        if not np.all(np.isfinite(c)):
            raise SolveError(f"Crank-Nicolson solve produced non-finite values at step {k + 1}")
        norms.append(float(op.norm(c)))
        if keep_snapshots:
            snaps.append(c.copy())
    times = dt * np.arange(n_steps + 1)
    return Trajectory(times, np.array(norms), snapshots=snaps, final=c)


def evolve(bc: BoundaryCondition, psi0: EdgeFunction, dt: float | None = None, t_end: float = 1.0,
           force: bool = False, keep_snapshots: bool = False, omega: float = float("nan")) -> Trajectory:
    """Heat evolution ``psi' = Delta(A, B) psi`` from ``psi0`` on ``psi0``'s grid.

    Refuses conditions that are not quasi-m-accretive unless ``force``.
    ``dt`` defaults to the grid spacing.
    """
    if not check_max_rank(bc):
        raise PreconditionError("evolve: (A|B) does not have maximal rank")
    if not check_assumption_A(bc) and not force:
        raise PreconditionError("evolve refused: Q A P^perp != 0, so -Delta(A, B) is not "
                                "quasi-m-accretive and the Cauchy problem is ill-posed (use force)")
    op = assemble(bc, grid=psi0.grid)
    dt = max(psi0.grid.spacings) if dt is None else dt
    n_steps = int(round(t_end / dt))
    c0 = op.from_function(psi0)
    traj = evolve_operator(op, c0, dt, n_steps, keep_snapshots=keep_snapshots)
    snaps = [op.to_function(c) for c in traj.snapshots] if keep_snapshots else None
    return Trajectory(traj.times, traj.norms, omega_used=omega, snapshots=snaps, final=traj.final)


@dataclass(frozen=True)
class AuditReport:
    passed: bool
    bound_ok: bool
    monotone: bool | None
    worst_margin: float
    worst_step_increase: float
    omega: float
    tol: float


def audit_contractivity(traj: Trajectory, omega: float, tol_semi: float = 1e-10) -> AuditReport:
    """Check ``||psi(t)|| <= exp(-omega t) ||psi_0||`` and, for ``omega >= 0``,
    non-increase of the norm from step to step (all up to ``tol_semi``)."""
    n0 = traj.norms[0]
    bound = np.exp(-omega * traj.times) * n0
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(bound > 0, traj.norms / bound, np.where(traj.norms > 0, np.inf, 1.0))
        step = np.where(traj.norms[:-1] > 0, traj.norms[1:] / traj.norms[:-1] - 1.0,
                        np.where(traj.norms[1:] > 0, np.inf, 0.0))
    worst = float(np.max(ratio) - 1.0)
    bound_ok = bool(worst <= tol_semi)
    worst_step = float(np.max(step)) if len(step) else 0.0
    monotone = bool(worst_step <= tol_semi) if omega >= -tol_semi else None
    return AuditReport(passed=bound_ok and monotone is not False, bound_ok=bound_ok, monotone=monotone,
                       worst_margin=worst, worst_step_increase=worst_step, omega=omega, tol=tol_semi)
