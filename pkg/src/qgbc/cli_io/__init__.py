"""Command line, file formats and example boundary conditions."""

from .generators import (
    dirichlet_interval,
    gen_counterexample,
    gen_delta,
    gen_delta_prime,
    gen_dirichlet,
    gen_neumann,
    neumann_interval,
)
from .serialization import InputError, bc_from_dict, bc_to_dict, graph_from_dict, graph_to_dict

__all__ = [
    "InputError",
    "bc_from_dict",
    "bc_to_dict",
    "dirichlet_interval",
    "gen_counterexample",
    "gen_delta",
    "gen_delta_prime",
    "gen_dirichlet",
    "gen_neumann",
    "graph_from_dict",
    "graph_to_dict",
    "neumann_interval",
]
