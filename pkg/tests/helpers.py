"""Random boundary conditions and graphs shared by the test modules."""

import numpy as np
import scipy.linalg as sla
from scipy.linalg import null_space, orth

from qgbc.boundary_conditions import BoundaryCondition
from qgbc.graph_core import MetricGraph

# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def cplx(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_graph(rng, d):
    """Graph with boundary dimension ``d``, mixing external and internal edges."""
    n_int = int(rng.integers(0, d // 2 + 1))
    n_ext = d - 2 * n_int
    nv = int(rng.integers(1, 4))
    verts = list(range(nv))
    internals = [(int(rng.integers(nv)), int(rng.integers(nv)), float(rng.uniform(0.5, 3.0)))
                 for _ in range(n_int)]
    externals = [int(rng.integers(nv)) for _ in range(n_ext)]
    return MetricGraph(verts, internals, externals)


def random_rank_matrix(rng, d, r):
    if r == 0:
        return np.zeros((d, d), dtype=complex)
    return cplx(rng, d, r) @ cplx(rng, r, d)


def projectors(B):
    """Independent projectors onto Ker B and (Ran B)^perp."""
    d = B.shape[0]
    N = null_space(B, rcond=1e-10)
    W = null_space(B.conj().T, rcond=1e-10)
    return N @ N.conj().T if N.size else np.zeros((d, d)), W @ W.conj().T if W.size else np.zeros((d, d))


def assumption_A_oracle(A, B):
    """``Ran(A P^perp) ⊂ Ran B`` via ranks, with ``P^perp`` spanned by ``orth(B*)``."""
    rB = np.linalg.matrix_rank(B, tol=1e-8)
    R = orth(B.conj().T, rcond=1e-10)
    if R.size == 0:
        return True
    return np.linalg.matrix_rank(np.hstack([B, A @ R]), tol=1e-8) == rB


def random_pair(rng, graph, kind="generic"):
    """Boundary condition of a prescribed kind.

    ``generic``: random rank of B, A unconstrained.  ``assumption_A``:
    Q A P^perp removed.  ``violating``: rank B in [1, d-1] and a random
    A, so Q A P^perp != 0 almost surely.  ``m_accretive``: gauge transform
    of (P + L, P^perp) with Re L <= 0.  ``rank_deficient``: A and B share a
    left null vector.
    """
    d = graph.d()
    if kind == "generic":
        B = random_rank_matrix(rng, d, int(rng.integers(0, d + 1)))
        A = cplx(rng, d, d)
    elif kind == "assumption_A":
        B = random_rank_matrix(rng, d, int(rng.integers(0, d + 1)))
        P, Q = projectors(B)
        A = cplx(rng, d, d)
        A = A - Q @ A @ (np.eye(d) - P)
    elif kind == "violating":
        B = random_rank_matrix(rng, d, int(rng.integers(1, d)))
        A = cplx(rng, d, d)
    elif kind == "m_accretive":
        r = int(rng.integers(0, d + 1))
        U, _ = np.linalg.qr(cplx(rng, d, d))
        Pp = U[:, :r] @ U[:, :r].conj().T
        S = cplx(rng, d, d)
        K = cplx(rng, d, d)
        L = Pp @ (-(S @ S.conj().T) + 1j * (K + K.conj().T)) @ Pp
        C = cplx(rng, d, d) + 3 * np.eye(d)
        return BoundaryCondition(C @ (np.eye(d) - Pp + L), C @ Pp, graph)
    elif kind == "rank_deficient":
        A, B = cplx(rng, d, d), cplx(rng, d, d)
        S = random_rank_matrix(rng, d, d - 1)
        A, B = S @ A, S @ B
    else:
        raise ValueError(kind)
    return BoundaryCondition(A, B, graph)


def resolved_min_real(op):
    """Smallest real part of the discrete spectrum from two eigensolvers.

    Returns the Cholesky-reduced value and the gap to the QZ value; a gap
    comparable to the value means it is rounding, not spectrum.
    """
    a = op.min_real_eigenvalue().real
    w = sla.eigvals(*op.dense())
    b = w[np.isfinite(w)].real.min()
    return a, abs(a - b)
