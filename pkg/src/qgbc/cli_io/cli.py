"""Command-line interface.

Exit codes: 0 success, 1 unreadable or malformed input, 2 refusal on
mathematical grounds (for example evolving a condition that is not
quasi-m-accretive without ``--force``).
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..boundary_conditions import PreconditionError, classify, normalize, real_part
from ..forms_numrange import (
    NoAlphaError,
    ProjectionError,
    build_witness,
    half_plane_bound,
    sample_numerical_range,
    sector_bound,
)
from ..graph_core import GraphError, GridError, make_grid
from ..spectral_semigroup import (
    SolveError,
    assemble,
    audit_contractivity,
    evolve_operator,
    growth_bound,
    suggested_R,
)
from . import generators as gen
from .serialization import (
    InputError,
    bc_to_dict,
    dumps,
    graph_to_dict,
    load_bc,
    load_graph,
    matrix_to_json,
    normalized_to_dict,
    parse_complex_literal,
    spectra_to_dict,
    verdict_to_dict,
    write_csv,
    write_json,
)

COMMANDS = ("classify", "normalize", "realpart", "growth-bound", "simulate", "witness", "numrange", "example")
EXAMPLES = ("delta", "delta-prime", "counterexample", "dirichlet", "neumann")
EXIT_OK, EXIT_INPUT, EXIT_REFUSED = 0, 1, 2


class Refusal(RuntimeError):
    pass


@dataclass(frozen=True)
class RunConfig:
    command: str
    graph: Path | None = None
    bc: Path | None = None
    example: str | None = None
    degree: int = 3
    gamma: complex = 0j
    tau: float = 0.0
    length: float = float(np.pi)
    h: float = 0.05
    R: float | None = None
    dt: float | None = None
    t_end: float = 1.0
    n_max: int = 20
    n_samples: int = 1000
    seed: int = 42
    force: bool = False
    output_dir: Path = Path(".")

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise InputError(f"unknown command {self.command!r}")
        for name in ("h", "t_end", "length"):
            if not getattr(self, name) > 0:
                raise InputError(f"--{name.replace('_', '-')} must be positive")
        for name in ("R", "dt"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise InputError(f"--{name.replace('_', '-')} must be positive")
        for name in ("n_max", "n_samples", "degree"):
            if getattr(self, name) < 1:
                raise InputError(f"--{name.replace('_', '-')} must be at least 1")


def _complex_arg(text: str) -> complex:
    try:
        return parse_complex_literal(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qgbc", description="Boundary conditions for Laplacians on metric graphs.")
    p.add_argument("command", choices=COMMANDS)
    src = p.add_argument_group("input")
    src.add_argument("--graph", type=Path, help="graph JSON")
    src.add_argument("--bc", type=Path, help="boundary condition JSON (needs --graph)")
    src.add_argument("--example", choices=EXAMPLES, help="use a built-in boundary condition")
    src.add_argument("--degree", type=int, default=3, help="star degree for delta / delta-prime")
    src.add_argument("--gamma", type=_complex_arg, default=0j, help='coupling, "a+bi" or "[a,b]"')
    src.add_argument("--tau", type=float, default=0.0, help="counterexample parameter in [0, pi/2]")
    src.add_argument("--length", type=float, default=float(np.pi), help="interval length for dirichlet / neumann")
    num = p.add_argument_group("numerics")
    num.add_argument("--h", type=float, default=0.05)
    num.add_argument("--R", type=float, default=None, help="truncation of external edges")
    num.add_argument("--dt", type=float, default=None)
    num.add_argument("--t-end", type=float, default=1.0)
    num.add_argument("--n-max", type=int, default=20)
    num.add_argument("--n-samples", type=int, default=1000)
    num.add_argument("--seed", type=int, default=42)
    p.add_argument("--force", action="store_true", help="simulate even when the problem is ill-posed")
    p.add_argument("--output-dir", type=Path, default=Path("."))
    return p


def _glue_values(argv: list[str]) -> list[str]:
    """Let ``--gamma -1+2i`` through: argparse would read the value as an option."""
    out, it = [], iter(argv)
    for tok in it:
        if tok in ("--gamma", "--tau"):
            nxt = next(it, None)
            out.append(tok if nxt is None else f"{tok}={nxt}")
        else:
            out.append(tok)
    return out


def config_from_args(argv: list[str] | None = None) -> RunConfig:
    argv = sys.argv[1:] if argv is None else list(argv)
    ns = build_parser().parse_args(_glue_values(argv))
    return RunConfig(**vars(ns))


def load_condition(cfg: RunConfig):
    if cfg.example is not None:
        if cfg.bc is not None or cfg.graph is not None:
            raise InputError("--example cannot be combined with --graph/--bc")
        try:
            if cfg.example == "delta":
                return gen.gen_delta(cfg.degree, cfg.gamma)
            if cfg.example == "delta-prime":
                return gen.gen_delta_prime(cfg.degree, cfg.gamma)
            if cfg.example == "counterexample":
                return gen.gen_counterexample(cfg.tau)
            if cfg.example == "dirichlet":
                return gen.dirichlet_interval(cfg.length)
            return gen.neumann_interval(cfg.length)
        except ValueError as exc:
            raise InputError(f"--example {cfg.example}: {exc}") from exc
    if cfg.bc is None or cfg.graph is None:
        raise InputError("either --example or both --graph and --bc are required")
    return load_bc(cfg.bc, load_graph(cfg.graph))


def _require_qma(bc, what: str):
    cls = classify(bc)
    if not cls.rank_ok:
        raise Refusal(f"{what} refused: (A|B) does not have maximal rank")
    if not cls.quasi_m_accretive:
        raise Refusal(f"{what} refused: Q A P^perp != 0 (defect {cls.assumption_A_defect:.3e}), "
                      "the operator is not quasi-m-accretive")
    return cls


def _initial_state(grid):
    """Smooth default state: a bump on every external edge and ``1 + sin`` inside."""
    graph = grid.graph
    funcs = []
    for e in range(graph.n_edges):
        if graph.edge_is_external(e):
            funcs.append(lambda x: np.exp(-x ** 2))
        else:
            length = graph.internal_edges[e - graph.n_external].length
            funcs.append(lambda x, a=length: 1.0 + np.sin(np.pi * x / a))
    return grid.sample(funcs)


def cmd_classify(cfg, bc, out):
    res = verdict_to_dict(classify(bc))
    write_json(out / "verdict.json", res)
    return res


def cmd_normalize(cfg, bc, out):
    _require_qma(bc, "normalize")
    res = normalized_to_dict(normalize(bc))
    write_json(out / "normalized.json", res)
    return res


def cmd_realpart(cfg, bc, out):
    cls = _require_qma(bc, "realpart")
    rp = real_part(bc)
    sa = rp.rebuild(bc.graph)
    res = {**normalized_to_dict(rp), "A": matrix_to_json(sa.A), "B": matrix_to_json(sa.B),
           "m_accretive": cls.m_accretive}
    write_json(out / "realpart.json", res)
    return res


def cmd_growth_bound(cfg, bc, out):
    _require_qma(bc, "growth-bound")
    R = suggested_R(bc) if cfg.R is None else cfg.R
    gb = growth_bound(bc, h=cfg.h, R=R)
    res = {"omega": gb.omega, "omega_half": gb.omega_half, "omega_extrapolated": gb.omega_extrapolated,
           "error_estimate": gb.error_estimate, "h": gb.h, "R": gb.R}
    write_json(out / "growth_bound.json", res)
    op = assemble(real_part(bc).rebuild(bc.graph), h=cfg.h, R=R)
    write_json(out / "spectra.json", spectra_to_dict(op.eigenvalues(hermitian=True), cfg.h, R, operator="real_part"))
    return res


def cmd_simulate(cfg, bc, out):
    cls = classify(bc)
    if not cls.rank_ok:
        raise Refusal("simulate refused: (A|B) does not have maximal rank")
    if not cls.quasi_m_accretive and not cfg.force:
        raise Refusal("simulate refused: Q A P^perp != 0, so -Delta(A, B) is not quasi-m-accretive and "
                      "the Cauchy problem is ill-posed; pass --force to run anyway")
    R = (suggested_R(bc) if cls.quasi_m_accretive else bc.graph.default_R()) if cfg.R is None else cfg.R
    grid = make_grid(bc.graph, cfg.h, R)
    op = assemble(bc, grid=grid)
    dt = cfg.h if cfg.dt is None else cfg.dt
    n_steps = max(1, int(round(cfg.t_end / dt)))
    c0 = op.project(_initial_state(grid))
    omega = growth_bound(bc, h=cfg.h, R=R).omega if cls.quasi_m_accretive else float("nan")
    traj = evolve_operator(op, c0, dt, n_steps)
    bound = np.exp(-omega * traj.times) * traj.norms[0]
    write_csv(out / "trajectory.csv", ["t", "norm", "bound"], zip(traj.times, traj.norms, bound))
    res = {"scheme": op.scheme, "h": cfg.h, "R": R, "dt": dt, "steps": n_steps, "omega": omega,
           "forced": bool(cfg.force and not cls.quasi_m_accretive),
           "initial_norm": float(traj.norms[0]), "final_norm": float(traj.norms[-1])}
    if cls.quasi_m_accretive:
        audit = audit_contractivity(traj, omega)
        res["audit"] = {"passed": audit.passed, "bound_ok": audit.bound_ok, "monotone": audit.monotone,
                        "worst_margin": audit.worst_margin, "worst_step_increase": audit.worst_step_increase}
    write_json(out / "simulate.json", res)
    return res


def cmd_witness(cfg, bc, out):
    try:
        seq = build_witness(bc, n_max=cfg.n_max, R=cfg.R)
    except (PreconditionError, NoAlphaError) as exc:
        raise Refusal(str(exc)) from exc
    cols = ["n", "re_rayleigh", "im_rayleigh", "norm", "bc_residual"]
    table = seq.table()
    write_csv(out / "witness.csv", cols, ([row[c] for c in cols] for row in table))
    res = {"alpha": [list(map(float, (z.real, z.imag))) for z in seq.alpha], "n_max": cfg.n_max,
           "min_re_rayleigh": min(r["re_rayleigh"] for r in table),
           "norm_ratio": float(seq.norms.max() / seq.norms.min())}
    write_json(out / "witness.json", res)
    return res


def cmd_numrange(cfg, bc, out):
    R = bc.graph.default_R() if cfg.R is None else cfg.R
    grid = make_grid(bc.graph, cfg.h, R)
    try:
        sample = sample_numerical_range(bc, grid, cfg.n_samples, seed=cfg.seed)
    except (PreconditionError, ProjectionError) as exc:
        raise Refusal(str(exc)) from exc
    write_csv(out / "numrange.csv", ["re_rayleigh", "im_rayleigh"], zip(sample.cloud.real, sample.cloud.imag))
    res = {"n_samples": cfg.n_samples, "seed": cfg.seed, "h": cfg.h, "R": R,
           "observed_half_plane": sample.half_plane(), "max_bc_residual": sample.max_bc_residual}
    cls = classify(bc)
    if cls.quasi_m_accretive:
        C, k = sector_bound(cls.normalized, grid)
        res.update(a_priori_half_plane=half_plane_bound(cls.normalized, grid), sector_vertex=C, sector_slope=k,
                   observed_sector_slope=sample.sector(C))
    write_json(out / "numrange.json", res)
    return res


def cmd_example(cfg, bc, out):
    write_json(out / "graph.json", graph_to_dict(bc.graph))
    write_json(out / "bc.json", bc_to_dict(bc))
    return {"graph": str(out / "graph.json"), "bc": str(out / "bc.json"), "d": bc.d}


HANDLERS = {
    "classify": cmd_classify,
    "normalize": cmd_normalize,
    "realpart": cmd_realpart,
    "growth-bound": cmd_growth_bound,
    "simulate": cmd_simulate,
    "witness": cmd_witness,
    "numrange": cmd_numrange,
    "example": cmd_example,
}


def run(cfg: RunConfig) -> int:
    try:
        bc = load_condition(cfg)
        res = HANDLERS[cfg.command](cfg, bc, Path(cfg.output_dir))
    except Refusal as exc:
        print(f"qgbc: {exc}", file=sys.stderr)
        return EXIT_REFUSED
    except (PreconditionError, SolveError) as exc:
        print(f"qgbc: refused: {exc}", file=sys.stderr)
        return EXIT_REFUSED
    except (InputError, GraphError, GridError, OSError) as exc:
        print(f"qgbc: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    sys.stdout.write(dumps(res))
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    try:
        cfg = config_from_args(argv)
    except InputError as exc:
        print(f"qgbc: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
