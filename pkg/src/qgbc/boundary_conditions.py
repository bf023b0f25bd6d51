"""Boundary conditions ``A psi + B psi' = 0`` and their classification.

A pair ``(A, B)`` of ``d x d`` complex matrices defines the Laplacian
``-Delta(A, B)`` on the domain ``{psi : [psi] in Ker(A, B)}``.  This module
decides, in floating point with declared thresholds:

* maximal rank of ``(A | B)``;
* ``Q A P^perp = 0`` where ``P`` projects onto ``Ker B`` and ``Q`` onto
  ``(Ran B)^perp`` -- together with maximal rank this is exactly
  quasi-m-accretivity (and then m-sectoriality);
* m-accretivity via negativity of ``Re(A B*) + B M0(a) B*``.

It also produces the normalized parametrization ``(P, L)`` and the
self-adjoint real part ``(P, Re L)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .graph_core import MetricGraph

EPS = np.finfo(float).eps
TOL_ZERO = 1e-10
TOL_PSD = 1e-10
# products of projectors carry rounding of a few d*eps; stay well above it
RANK_SAFETY = 100.0


class BoundaryConditionError(ValueError):
    pass


class PreconditionError(BoundaryConditionError):
    """Raised when an operation needs an assumption the input violates."""


def _herm(X: np.ndarray) -> np.ndarray:
    return 0.5 * (X + X.conj().T)


def rank_tolerance(s: np.ndarray, d: int) -> float:
    return RANK_SAFETY * d * EPS * (s[0] if s.size else 0.0)


@dataclass(frozen=True, eq=False)
class BoundaryCondition:
    A: np.ndarray
    B: np.ndarray
    graph: MetricGraph

    def __post_init__(self):
        A = np.array(self.A, dtype=complex)
        B = np.array(self.B, dtype=complex)
        d = self.graph.d()
        if A.shape != (d, d) or B.shape != (d, d):
            raise BoundaryConditionError(
                f"A and B must be {d}x{d} for this graph, got {A.shape} and {B.shape}")
        A.flags.writeable = False
        B.flags.writeable = False
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def d(self) -> int:
        return self.graph.d()

    def residual(self, psi: np.ndarray, dpsi: np.ndarray) -> np.ndarray:
        """``||A psi + B psi'||`` (batched over leading axes)."""
        r = psi @ self.A.T + dpsi @ self.B.T
        return np.linalg.norm(r, axis=-1)

    def relative_residual(self, psi: np.ndarray, dpsi: np.ndarray) -> np.ndarray:
        scale = np.linalg.norm(psi, axis=-1) + np.linalg.norm(dpsi, axis=-1)
        return self.residual(psi, dpsi) / np.where(scale > 0, scale, 1.0)

    def transformed(self, C: np.ndarray) -> "BoundaryCondition":
        """The gauge-equivalent pair ``(C A, C B)``."""
        return BoundaryCondition(C @ self.A, C @ self.B, self.graph)


@dataclass(frozen=True, eq=False)
class NormalizedBC:
    """``P`` projects onto ``Ker B``; ``L`` acts on ``Ran P^perp``.

    The domain is ``P psi = 0`` and ``L psi + P^perp psi' = 0``.
    """

    P: np.ndarray
    L: np.ndarray

    @property
    def P_perp(self) -> np.ndarray:
        return np.eye(self.P.shape[0]) - self.P

    def rebuild(self, graph: MetricGraph) -> BoundaryCondition:
        """The pair ``(P + L, P^perp)``."""
        return BoundaryCondition(self.P + self.L, self.P_perp, graph)

    def check(self, tol: float = 1e-10) -> None:
        P, L = self.P, self.L
        for name, X in (("P^2 - P", P @ P - P), ("P - P*", P - P.conj().T), ("L P", L @ P), ("P L", P @ L)):
            if np.linalg.norm(X) > tol * (1 + np.linalg.norm(P) + np.linalg.norm(L)):
                raise BoundaryConditionError(f"normalized bc invariant violated: {name}")


def compute_projectors(B: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Orthogonal projectors ``P`` onto ``Ker B`` and ``Q`` onto ``(Ran B)^perp``."""
    B = np.asarray(B, dtype=complex)
    d = B.shape[0]
    U, s, Vh = np.linalg.svd(B)
    r = int(np.sum(s > rank_tolerance(s, d)))
    V0 = Vh[r:].conj().T
    U0 = U[:, r:]
    return V0 @ V0.conj().T, U0 @ U0.conj().T


def _rank(M: np.ndarray) -> int:
    s = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(s > rank_tolerance(s, M.shape[0])))


def check_max_rank(bc: BoundaryCondition) -> bool:
    """``(A | B)`` has rank ``d``."""
    return _rank(np.hstack([bc.A, bc.B])) == bc.d


def assumption_A_defect(bc: BoundaryCondition) -> float:
    """``||Q A P^perp||_F``."""
    P, Q = compute_projectors(bc.B)
    Pp = np.eye(bc.d) - P
    return float(np.linalg.norm(Q @ bc.A @ Pp))


def check_assumption_A(bc: BoundaryCondition) -> bool:
    return bool(assumption_A_defect(bc) <= TOL_ZERO * (1 + np.linalg.norm(bc.A)))


def normalizing_matrix(bc: BoundaryCondition) -> np.ndarray:
    """Invertible ``C`` with ``C B = P^perp``.

    ``C`` inverts ``B`` from ``Ran B`` onto ``Ran P^perp`` and maps
    ``(Ran B)^perp`` isometrically onto ``Ker B`` using the singular bases.
    Only the maximal-rank condition is needed for ``C A`` to be meaningful.
    """
    d = bc.d
    U, s, Vh = np.linalg.svd(bc.B)
    r = int(np.sum(s > rank_tolerance(s, d)))
    Bplus = Vh[:r].conj().T @ np.diag(1.0 / s[:r]) @ U[:, :r].conj().T
    iso = Vh[r:].conj().T @ U[:, r:].conj().T
    return Bplus + iso


def normalize(bc: BoundaryCondition) -> NormalizedBC:
    """``(P, L)`` with ``L = (Q^perp B P^perp)^{-1} Q^perp A P^perp``."""
    if not check_max_rank(bc):
        raise PreconditionError("normalize: (A|B) does not have maximal rank")
    if not check_assumption_A(bc):
        raise PreconditionError(
            f"normalize: Q A P^perp != 0 (norm {assumption_A_defect(bc):.3e}), "
            "the operator is not quasi-m-accretive")
    P, _ = compute_projectors(bc.B)
    Pp = np.eye(bc.d) - P
    # pinv(B) already annihilates (Ran B)^perp, so Q^perp is implicit
    U, s, Vh = np.linalg.svd(bc.B)
    r = int(np.sum(s > rank_tolerance(s, bc.d)))
    Bplus = Vh[:r].conj().T @ np.diag(1.0 / s[:r]) @ U[:, :r].conj().T
    L = Pp @ Bplus @ bc.A @ Pp
    return NormalizedBC(P, L)


def kernel_projector(bc: BoundaryCondition) -> np.ndarray:
    """Orthogonal projector in ``K^2`` onto ``M(A, B) = Ker(A | B)``."""
    AB = np.hstack([bc.A, bc.B])
    _, s, Vh = np.linalg.svd(AB)
    r = int(np.sum(s > rank_tolerance(s, bc.d)))
    if r != bc.d:
        raise PreconditionError("(A|B) is rank deficient; M(A, B) is not d-dimensional")
    N = Vh[r:].conj().T
    return N @ N.conj().T


def equivalent(bc1: BoundaryCondition, bc2: BoundaryCondition, tol: float = TOL_ZERO) -> bool:
    """Whether both pairs define the same subspace ``M`` of ``K^2``."""
    if bc1.d != bc2.d:
        return False
    return bool(np.linalg.norm(kernel_projector(bc1) - kernel_projector(bc2)) <= tol * np.sqrt(bc1.d))


def m0_matrix(graph: MetricGraph) -> np.ndarray:
    ne, ni = graph.n_external, graph.n_internal
    M = np.zeros((graph.d(), graph.d()))
    inv_a = np.diag(1.0 / graph.lengths) if ni else np.zeros((0, 0))
    lo, hi = slice(ne, ne + ni), slice(ne + ni, ne + 2 * ni)
    M[lo, lo] = -inv_a
    M[lo, hi] = inv_a
    M[hi, lo] = inv_a
    M[hi, hi] = -inv_a
    return M


def m_accretive_matrix(bc: BoundaryCondition) -> np.ndarray:
    """The Hermitian matrix ``Re(A B*) + B M0(a) B*``."""
    return _herm(bc.A @ bc.B.conj().T) + bc.B @ m0_matrix(bc.graph) @ bc.B.conj().T


def is_negative_semidefinite(M: np.ndarray, tol: float = TOL_PSD) -> bool:
    M = _herm(M)
    if M.size == 0:
        return True
    return bool(np.linalg.eigvalsh(M)[-1] <= tol * (1 + np.linalg.norm(M, 2)))


def check_m_accretive(bc: BoundaryCondition) -> bool:
    if not check_max_rank(bc):
        return False
    ok = is_negative_semidefinite(m_accretive_matrix(bc))
    if ok and not check_assumption_A(bc):
        warnings.warn("m-accretivity criterion holds but Q A P^perp != 0 at the chosen tolerances; "
                      "input is numerically degenerate", RuntimeWarning, stacklevel=2)
    return ok


def real_part(bc: BoundaryCondition) -> NormalizedBC:
    """``(P, Re L)``; the self-adjoint real part is ``-Delta(P + Re L, P^perp)``."""
    nbc = normalize(bc)
    return NormalizedBC(nbc.P, _herm(nbc.L))


def check_self_adjoint(bc: BoundaryCondition) -> bool:
    if not (check_max_rank(bc) and check_assumption_A(bc)):
        return False
    L = normalize(bc).L
    return bool(np.linalg.norm(L - L.conj().T) <= TOL_ZERO * (1 + np.linalg.norm(L)))


QWBVerdict = Literal["negative_semidefinite", "indefinite_or_positive"]


def qwb_check(A_block: np.ndarray, B_block: np.ndarray) -> QWBVerdict:
    """Semidefiniteness of ``[[A, B*], [B, 0]]`` for Hermitian ``A``.

    Such a matrix is ``<= 0`` exactly when ``A <= 0`` and ``B = 0``; a
    disagreement between that prediction and the eigenvalue test is reported
    as a ``RuntimeWarning``.
    """
    A_block = np.atleast_2d(np.asarray(A_block, dtype=complex))
    B_block = np.atleast_2d(np.asarray(B_block, dtype=complex))
    k = A_block.shape[0]
    if A_block.shape != (k, k):
        raise BoundaryConditionError("A_block must be square")
    if np.linalg.norm(A_block - A_block.conj().T) > TOL_ZERO * (1 + np.linalg.norm(A_block)):
        raise BoundaryConditionError("A_block must be Hermitian")
    if B_block.shape[1] != k:
        raise BoundaryConditionError(f"B_block must have {k} columns, got shape {B_block.shape}")
    m = B_block.shape[0]
    M = np.block([[A_block, B_block.conj().T], [B_block, np.zeros((m, m))]])
    verdict: QWBVerdict = "negative_semidefinite" if is_negative_semidefinite(M) else "indefinite_or_positive"
    predicted = (is_negative_semidefinite(A_block)
                 and np.linalg.norm(B_block) <= TOL_ZERO * (1 + np.linalg.norm(A_block)))
    if predicted != (verdict == "negative_semidefinite"):
        warnings.warn("block matrix verdict disagrees with the block-wise prediction at the chosen "
                      "tolerances", RuntimeWarning, stacklevel=2)
    return verdict


@dataclass(frozen=True, eq=False)
class Classification:
    rank_ok: bool
    assumption_A_ok: bool
    quasi_m_accretive: bool
    m_sectorial: bool
    m_accretive: bool
    self_adjoint: bool
    normalized: NormalizedBC | None = None
    real_part: NormalizedBC | None = None
    assumption_A_defect: float = float("nan")
    m_accretive_max_eig: float = float("nan")
    tolerances: dict = field(default_factory=dict)

    def flags(self) -> dict[str, bool]:
        return {k: getattr(self, k) for k in
                ("rank_ok", "assumption_A_ok", "quasi_m_accretive", "m_sectorial", "m_accretive", "self_adjoint")}


def classify(bc: BoundaryCondition) -> Classification:
    """Total classification; ill-posed input yields ``rank_ok=False``."""
    rank_ok = check_max_rank(bc)
    defect = assumption_A_defect(bc)
    a_ok = check_assumption_A(bc)
    qma = rank_ok and a_ok
    crit = m_accretive_matrix(bc)
    max_eig = float(np.linalg.eigvalsh(_herm(crit))[-1])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        m_acc = qma and check_m_accretive(bc)
    nbc = normalize(bc) if qma else None
    rp = NormalizedBC(nbc.P, _herm(nbc.L)) if qma else None
    sa = qma and bool(np.linalg.norm(nbc.L - nbc.L.conj().T) <= TOL_ZERO * (1 + np.linalg.norm(nbc.L)))
    AB = np.hstack([bc.A, bc.B])
    s = np.linalg.svd(AB, compute_uv=False)
    return Classification(
        rank_ok=rank_ok,
        assumption_A_ok=a_ok,
        quasi_m_accretive=qma,
        m_sectorial=qma,
        m_accretive=m_acc,
        self_adjoint=sa,
        normalized=nbc,
        real_part=rp,
        assumption_A_defect=defect,
        m_accretive_max_eig=max_eig,
        tolerances={
            "tol_rank": rank_tolerance(s, bc.d),
            "tol_zero": TOL_ZERO * (1 + float(np.linalg.norm(bc.A))),
            "tol_psd": TOL_PSD * (1 + float(np.linalg.norm(_herm(crit), 2))),
        },
    )
