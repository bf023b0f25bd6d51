"""JSON and CSV formats.

Complex numbers are written as ``[re, im]``; matrices are row-major nested
lists of such pairs.  Readers report the offending file and field.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from ..boundary_conditions import BoundaryCondition, BoundaryConditionError, Classification, NormalizedBC
from ..graph_core import GraphError, InternalEdge, MetricGraph


class InputError(ValueError):
    """Unreadable or malformed input; the message names the file and field."""


def complex_to_json(z) -> list[float]:
    z = complex(z)
    return [float(z.real), float(z.imag)]


def matrix_to_json(M: np.ndarray) -> list:
    return [[complex_to_json(z) for z in row] for row in np.asarray(M)]


def parse_complex(obj: Any, where: str) -> complex:
    if isinstance(obj, bool):
        raise InputError(f"{where}: expected a number or [re, im], got {obj!r}")
    if isinstance(obj, (int, float)):
        return complex(obj)
    if isinstance(obj, (list, tuple)) and len(obj) == 2 and all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in obj):
        return complex(obj[0], obj[1])
    raise InputError(f"{where}: expected a number or [re, im], got {obj!r}")


def parse_matrix(obj: Any, where: str) -> np.ndarray:
    if not isinstance(obj, list) or not obj or not all(isinstance(r, list) for r in obj):
        raise InputError(f"{where}: expected a non-empty list of rows")
    width = len(obj[0])
    rows = []
    for i, row in enumerate(obj):
        if len(row) != width:
            raise InputError(f"{where}[{i}]: row has {len(row)} entries, expected {width}")
        rows.append([parse_complex(v, f"{where}[{i}][{j}]") for j, v in enumerate(row)])
    return np.array(rows, dtype=complex)


def parse_complex_literal(text: str) -> complex:
    """Parse ``"a+bi"``, ``"a+bj"``, ``"bi"``, ``"a"`` or ``"[a,b]"``."""
    s = text.strip()
    if s.startswith("["):
        try:
            return parse_complex(json.loads(s), "literal")
        except json.JSONDecodeError as exc:
            raise ValueError(f"cannot parse complex literal {text!r}") from exc
    try:
        return complex(s.replace(" ", "").replace("i", "j"))
    except ValueError as exc:
        raise ValueError(f"cannot parse complex literal {text!r}") from exc


def graph_to_dict(graph: MetricGraph) -> dict:
    return {
        "vertices": list(graph.vertices),
        "internal_edges": [{"from": e.initial, "to": e.terminal, "length": e.length}
                           for e in graph.internal_edges],
        "external_edges": [{"from": v} for v in graph.external_edges],
    }


def _field(obj: dict, key: str, where: str):
    if not isinstance(obj, dict):
        raise InputError(f"{where}: expected an object")
    if key not in obj:
        raise InputError(f"{where}: missing field '{key}'")
    return obj[key]


def graph_from_dict(obj: Any, source: str = "graph") -> MetricGraph:
    verts = _field(obj, "vertices", source)
    if not isinstance(verts, list):
        raise InputError(f"{source}.vertices: expected a list")
    internals = []
    for i, e in enumerate(_field(obj, "internal_edges", source) if "internal_edges" in obj else []):
        w = f"{source}.internal_edges[{i}]"
        length = _field(e, "length", w)
        if isinstance(length, bool) or not isinstance(length, (int, float)):
            raise InputError(f"{w}.length: expected a number, got {length!r}")
        internals.append(InternalEdge(_field(e, "from", w), _field(e, "to", w), float(length)))
    externals = [_field(e, "from", f"{source}.external_edges[{i}]")
                 for i, e in enumerate(obj.get("external_edges", []))]
    try:
        return MetricGraph(verts, internals, externals)
    except GraphError as exc:
        raise InputError(f"{source}: {exc}") from exc


def bc_to_dict(bc: BoundaryCondition) -> dict:
    return {"A": matrix_to_json(bc.A), "B": matrix_to_json(bc.B)}


def bc_from_dict(obj: Any, graph: MetricGraph, source: str = "bc") -> BoundaryCondition:
    A = parse_matrix(_field(obj, "A", source), f"{source}.A")
    B = parse_matrix(_field(obj, "B", source), f"{source}.B")
    try:
        return BoundaryCondition(A, B, graph)
    except BoundaryConditionError as exc:
        raise InputError(f"{source}: {exc} (graph has d={graph.d()})") from exc


def normalized_to_dict(nbc: NormalizedBC) -> dict:
    return {"P": matrix_to_json(nbc.P), "L": matrix_to_json(nbc.L)}


def verdict_to_dict(cls: Classification) -> dict:
    out: dict = {"flags": cls.flags(),
                 "assumption_A_defect": cls.assumption_A_defect,
                 "m_accretive_max_eig": cls.m_accretive_max_eig,
                 "tolerances": dict(cls.tolerances)}
    if cls.normalized is not None:
        out["normalized"] = normalized_to_dict(cls.normalized)
    return out


def spectra_to_dict(eigs: np.ndarray, h: float, R: float, **meta) -> dict:
    w = np.asarray(eigs, dtype=complex)
    w = w[np.lexsort((w.imag, w.real))]
    return {"h": h, "R": R, **meta, "eigenvalues": [complex_to_json(z) for z in w]}


def _clean(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return _clean(obj.item())
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2) + "\n"


def write_json(path: Path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj))
    return path


def read_json(path: Path) -> Any:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"{path}: cannot read ({exc.strerror})") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc


def load_graph(path: Path) -> MetricGraph:
    return graph_from_dict(read_json(path), str(path))


def load_bc(path: Path, graph: MetricGraph) -> BoundaryCondition:
    return bc_from_dict(read_json(path), graph, str(path))


def write_csv(path: Path, header: list[str], rows: Iterable[Iterable]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return path
