"""Boundary conditions for Laplacians on finite metric graphs.

Classifies a pair ``(A, B)`` as quasi-m-accretive, m-sectorial or
m-accretive, and checks the verdicts numerically through quadratic forms,
witness sequences, discrete spectra and heat evolution.
"""

from .boundary_conditions import (
    BoundaryCondition,
    Classification,
    NormalizedBC,
    PreconditionError,
    check_assumption_A,
    check_m_accretive,
    check_max_rank,
    check_self_adjoint,
    classify,
    equivalent,
    normalize,
    real_part,
)
from .cli_io.generators import gen_counterexample, gen_delta, gen_delta_prime
from .forms_numrange import build_witness, quadratic_form, sample_numerical_range
from .graph_core import EdgeFunction, MetricGraph, make_grid, star_graph, trace
from .spectral_semigroup import assemble, evolve, growth_bound

__version__ = "0.1.0"

__all__ = [
    "BoundaryCondition",
    "Classification",
    "EdgeFunction",
    "MetricGraph",
    "NormalizedBC",
    "PreconditionError",
    "assemble",
    "build_witness",
    "check_assumption_A",
    "check_m_accretive",
    "check_max_rank",
    "check_self_adjoint",
    "classify",
    "equivalent",
    "evolve",
    "gen_counterexample",
    "gen_delta",
    "gen_delta_prime",
    "growth_bound",
    "make_grid",
    "normalize",
    "quadratic_form",
    "real_part",
    "sample_numerical_range",
    "star_graph",
    "trace",
]
