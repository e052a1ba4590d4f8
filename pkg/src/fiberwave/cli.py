"""Command-line front end.

Subcommands: solve, sweep, junction, network-validate, check.  The graph
file format is JSON:

    {"channels": [{"id": 1, "length": "inf" | 2.5,
                   "cross_section": {"shape": "interval", "dims": [3.14]},
                   "start": 1, "end": null}, ...],
     "vertices": [{"id": 1, "ends": [[1, "start"], ...],
                   "junction": {"kind": "dirichlet"}}, ...]}

Junction kinds: dirichlet, transparent, matrix (fields lambda, matrix),
tabulated (field table: list of {lambda, matrix}), from_oracle (field
geometry).  Complex numbers are [re, im] pairs.  Geometries are
{"cores": [[x0,y0,x1,y1], ...], "stubs": [{"rect": [...], "direction":
"+x"}, ...], "h": ...}.

Exit codes: 0 success, 2 parse/validation errors, 3 numeric errors or an
uncertified solve (unless --allow-flagged), 4 I/O errors.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import cross_section as cs
from .errors import FiberwaveError, GeometryInvalid, GraphInvalid, NearSingular, ParseError
from .graph_model import (
    Channel,
    Dirichlet,
    MatrixJunction,
    MetricGraph,
    OracleJunction,
    TabulatedJunction,
    Transparent,
    Vertex,
    validate_graph,
)
from .graph_solver import (
    RCOND_TOL,
    SolveRequest,
    boundary_value_matrices,
    energy_report,
    gc_residual,
    resolve_vertex,
    solve_scattering,
)
from .helmholtz_oracle import PlanarGeometry, Stub, junction_matrix, solve_network
from .spectrum_tools import export_spectrum, sweep

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERIC = 3
EXIT_IO = 4


# ---------------------------------------------------------------------------
# JSON (de)serialization


def _complex_out(z: complex) -> list[float]:
    return [float(np.real(z)), float(np.imag(z))]


def _complex_in(v) -> complex:
    if isinstance(v, (int, float)):
        return complex(v)
    if isinstance(v, (list, tuple)) and len(v) == 2:
        return complex(float(v[0]), float(v[1]))
    raise ParseError(f"expected complex as [re, im], got {v!r}")


def _matrix_out(m) -> list:
    arr = np.asarray(m, dtype=complex)
    return [[_complex_out(z) for z in row] for row in arr]


def _matrix_in(rows) -> tuple[tuple[complex, ...], ...]:
    return tuple(tuple(_complex_in(v) for v in row) for row in rows)


def shape_to_json(shape) -> dict:
    if isinstance(shape, cs.Interval):
        return {"shape": "interval", "dims": [shape.width]}
    if isinstance(shape, cs.Rectangle):
        return {"shape": "rectangle", "dims": [shape.side_a, shape.side_b]}
    if isinstance(shape, cs.Disk):
        return {"shape": "disk", "dims": [shape.radius]}
    raise ParseError(f"unknown cross-section {shape!r}")


def shape_from_json(d: dict):
    try:
        kind, dims = d["shape"], d["dims"]
        if kind == "interval":
            return cs.Interval(float(dims[0]))
        if kind == "rectangle":
            return cs.Rectangle(float(dims[0]), float(dims[1]))
        if kind == "disk":
            return cs.Disk(float(dims[0]))
    except (KeyError, IndexError, TypeError, ValueError) as exc:
        raise ParseError(f"bad cross_section block: {d!r}") from exc
    raise ParseError(f"unknown cross-section shape {d.get('shape')!r}")


def geometry_to_json(geom: PlanarGeometry) -> dict:
    return {
        "cores": [list(r) for r in geom.cores],
        "stubs": [{"rect": list(s.rect), "direction": s.direction} for s in geom.stubs],
        "h": geom.h,
    }


def geometry_from_json(d: dict) -> PlanarGeometry:
    try:
        cores = tuple(tuple(float(x) for x in r) for r in d.get("cores", []))
        stubs = tuple(
            Stub(rect=tuple(float(x) for x in s["rect"]), direction=str(s["direction"]))
            for s in d["stubs"]
        )
        return PlanarGeometry(cores=cores, stubs=stubs, h=float(d["h"]))
    except (KeyError, IndexError, TypeError, ValueError) as exc:
        raise ParseError(f"bad geometry block: {exc}") from exc


def junction_to_json(j) -> dict:
    if isinstance(j, Dirichlet):
        return {"kind": "dirichlet"}
    if isinstance(j, Transparent):
        return {"kind": "transparent"}
    if isinstance(j, MatrixJunction):
        return {"kind": "matrix", "lambda": j.lam, "matrix": _matrix_out(j.matrix)}
    if isinstance(j, TabulatedJunction):
        return {
            "kind": "tabulated",
            "table": [{"lambda": lam, "matrix": _matrix_out(m)} for lam, m in j.table],
        }
    if isinstance(j, OracleJunction):
        return {"kind": "from_oracle", "geometry": geometry_to_json(j.geometry)}
    raise ParseError(f"unknown junction model {j!r}")


def junction_from_json(d: dict):
    kind = d.get("kind")
    if kind == "dirichlet":
        return Dirichlet()
    if kind == "transparent":
        return Transparent()
    if kind == "matrix":
        try:
            return MatrixJunction(lam=float(d["lambda"]), matrix=_matrix_in(d["matrix"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad matrix junction: {exc}") from exc
    if kind == "tabulated":
        try:
            table = tuple(
                (float(row["lambda"]), _matrix_in(row["matrix"])) for row in d["table"]
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad tabulated junction: {exc}") from exc
        return TabulatedJunction(table=table)
    if kind == "from_oracle":
        return OracleJunction(geometry=geometry_from_json(d.get("geometry", {})))
    raise ParseError(f"unknown junction kind {kind!r}")


def graph_to_json(g: MetricGraph) -> dict:
    return {
        "channels": [
            {
                "id": c.id,
                "length": "inf" if c.is_infinite else c.length,
                "cross_section": shape_to_json(c.cross_section),
                "start": c.start,
                "end": c.end,
            }
            for c in g.channels
        ],
        "vertices": [
            {
                "id": v.id,
                "ends": [[cid, which] for cid, which in v.ends],
                "junction": junction_to_json(v.junction),
            }
            for v in g.vertices
        ],
    }


def graph_from_json(d: dict) -> MetricGraph:
    try:
        channels = []
        for c in d["channels"]:
            raw_len = c["length"]
            length = math.inf if raw_len == "inf" else float(raw_len)
            channels.append(
                Channel(
                    id=int(c["id"]),
                    length=length,
                    cross_section=shape_from_json(c["cross_section"]),
                    start=int(c["start"]),
                    end=None if c.get("end") is None else int(c["end"]),
                )
            )
        vertices = []
        for v in d["vertices"]:
            ends = tuple((int(cid), str(which)) for cid, which in v["ends"])
            vertices.append(
                Vertex(id=int(v["id"]), ends=ends, junction=junction_from_json(v["junction"]))
            )
    except ParseError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad graph file: {exc}") from exc
    return MetricGraph(channels=tuple(channels), vertices=tuple(vertices))


def load_json(path: str) -> dict:
    try:
        with open(path) as f:
            text = f.read()
    except OSError as exc:
        raise exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc


def load_graph(path: str) -> MetricGraph:
    g = graph_from_json(load_json(path))
    violations = validate_graph(g)
    if violations:
        raise GraphInvalid(violations)
    return g


def _dump_json(payload: dict, path: str | None) -> None:
    text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    if path:
        with open(path, "w", newline="\n") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# Subcommands


def _cmd_solve(args) -> int:
    g = load_graph(args.graph)
    incident = _parse_incident(args.incident)
    fields, ns = solve_scattering(
        g,
        SolveRequest(lam=args.lam, eps=args.eps, incident=incident),
        allow_flagged=args.allow_flagged,
        rcond_tol=args.rcond_tol,
    )
    er = energy_report(ns)
    payload = {
        "lambda": ns.lam,
        "eps": ns.eps,
        "ordering": [list(e) for e in ns.ordering.entries],
        "d_diag": [float(v) for v in ns.d_diag],
        "t": _matrix_out(ns.t),
        "rcond": ns.rcond,
        "certified": ns.certified,
        "flux_balance": [float(v) for v in er.balance],
        "max_flux_cross": er.max_cross,
    }
    _dump_json(payload, args.out)
    return EXIT_OK if (ns.certified or args.allow_flagged) else EXIT_NUMERIC


def _cmd_sweep(args) -> int:
    g = load_graph(args.graph)
    sr = sweep(
        g,
        args.eps,
        args.lo,
        args.hi,
        args.steps,
        flag_tol=args.flag_tol,
        threads=args.threads,
    )
    export_spectrum(sr, args.out)
    flagged = [r for r in sr.rows if not r.certified]
    if flagged:
        sys.stderr.write(
            f"{len(flagged)} of {len(sr.rows)} sweep points flagged in "
            f"{len(sr.flagged_intervals)} interval(s)\n"
        )
        if not args.allow_flagged:
            return EXIT_NUMERIC
    return EXIT_OK


def _cmd_junction(args) -> int:
    geom = geometry_from_json(load_json(args.geometry))
    if args.h is not None:
        geom = PlanarGeometry(cores=geom.cores, stubs=geom.stubs, h=args.h)
    js = junction_matrix(geom, args.lam, n_ev=args.n_ev)
    payload = {
        "kind": "tabulated",
        "table": [{"lambda": js.lam, "matrix": _matrix_out(js.matrix)}],
        "meta": {
            "lambda": js.lam,
            "h": js.h,
            "geometry_hash": js.geometry_hash,
            "mode_counts": list(js.mode_counts),
        },
    }
    _dump_json(payload, args.out)
    return EXIT_OK


def _parse_incident(text: str | None) -> tuple[int, int] | None:
    if text is None:
        return None
    try:
        cid, mode = text.split(",")
        return (int(cid), int(mode))
    except ValueError as exc:
        raise ParseError(f"--incident expects 'channel,mode', got {text!r}") from exc


def _cmd_network_validate(args) -> int:
    g = load_graph(args.graph)
    eps_list = [float(e) for e in args.eps.split(",")]
    incident = _parse_incident(args.incident)
    lines = ["eps,channel,mode,t_graph_re,t_graph_im,t_oracle_re,t_oracle_im,abs_diff"]
    worst_by_eps = {}
    skipped = []
    for eps in eps_list:
        try:
            fields, ns = solve_scattering(g, SolveRequest(lam=args.lam, eps=eps))
        except NearSingular as exc:
            skipped.append(eps)
            sys.stderr.write(f"eps={eps}: graph solve flagged ({exc}); comparison skipped\n")
            continue
        columns = [incident] if incident else list(ns.ordering.entries)
        worst = 0.0
        for inc in columns:
            sample = solve_network(g, args.lam, eps, inc)
            col = ns.ordering.index(*inc)
            for cid, amps in sorted(sample.amplitudes.items()):
                for mode, t_o in enumerate(amps):
                    t_g = ns.t[ns.ordering.index(cid, mode), col]
                    diff = float(abs(t_g - t_o))
                    worst = max(worst, diff)
                    lines.append(
                        f"{eps!r},{cid},{mode},{float(t_g.real)!r},{float(t_g.imag)!r},"
                        f"{float(t_o.real)!r},{float(t_o.imag)!r},{diff!r}"
                    )
        worst_by_eps[eps] = worst
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", newline="\n") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    for eps, worst in worst_by_eps.items():
        sys.stderr.write(f"eps={eps}: max |t_graph - t_oracle| = {worst:.6e}\n")
    return EXIT_OK if not skipped or args.allow_flagged else EXIT_NUMERIC


def _spider_errors(g: MetricGraph, v, lam: float, eps: float) -> tuple[float, float]:
    """Solve the single-vertex problem with this vertex's resolved matrix and
    compare the boundary-value matrices with I + T and (i/eps) D (T - I)."""
    res = resolve_vertex(g, v, lam)
    channels = []
    ends = []
    for i, (cid, _which) in enumerate(v.ends):
        shape = g.channel(cid).cross_section
        channels.append(Channel(id=i + 1, length=math.inf, cross_section=shape, start=1, end=None))
        ends.append((i + 1, "start"))
    spider = MetricGraph(
        channels=tuple(channels),
        vertices=(
            Vertex(
                id=1,
                ends=tuple(ends),
                junction=MatrixJunction(lam=lam, matrix=tuple(map(tuple, res.t_matrix))),
            ),
        ),
    )
    fields, _ns = solve_scattering(spider, SolveRequest(lam=lam, eps=eps), allow_flagged=True)
    res_spider = resolve_vertex(spider, spider.vertices[0], lam)
    s0, s1 = boundary_value_matrices(fields, res_spider, spider)
    dim = res_spider.dim
    i_v = np.eye(dim)
    t_v = res_spider.t_matrix
    d_v = res_spider.d_diag
    e0 = float(np.max(np.abs(s0 - (i_v + t_v)))) if dim else 0.0
    e1 = float(np.max(np.abs(s1 - (1j / eps) * d_v[:, None] * (t_v - i_v)))) if dim else 0.0
    return e0, e1


def _cmd_check(args) -> int:
    g = load_graph(args.graph)
    tol = args.tol
    fields, ns = solve_scattering(
        g, SolveRequest(lam=args.lam, eps=args.eps), allow_flagged=args.allow_flagged
    )
    a = ns.weighted()
    eye = np.eye(ns.ordering.M)
    er = energy_report(ns)
    resolved = {v.id: resolve_vertex(g, v, args.lam) for v in g.vertices}
    gc_worst = 0.0
    for f in fields:
        for v in g.vertices:
            gc_worst = max(gc_worst, gc_residual(f, resolved[v.id], g, args.eps))
    spider0, spider1 = 0.0, 0.0
    for v in g.vertices:
        e0, e1 = _spider_errors(g, v, args.lam, args.eps)
        spider0, spider1 = max(spider0, e0), max(spider1, e1)

    checks = [
        ("unitarity ||A*A - I||_F", float(np.linalg.norm(a.conj().T @ a - eye)), tol),
        ("symmetry ||A - A^T||_F", float(np.linalg.norm(a - a.T)), tol),
        ("flux balance max", er.max_balance, tol),
        ("flux cross-term max", er.max_cross, tol),
        ("vertex condition residual", gc_worst, tol),
        ("spider values max err", spider0, tol),
        ("spider derivatives max err", spider1, tol),
    ]
    all_ok = True
    print(f"lambda={args.lam} eps={args.eps} M={ns.ordering.M} rcond={ns.rcond:.3e}")
    for name, value, threshold in checks:
        ok = value <= threshold
        all_ok = all_ok and ok
        print(f"{name:32s} {value:12.3e}  <= {threshold:.1e}  {'PASS' if ok else 'FAIL'}")
    if not ns.certified:
        print("solve not certified (resonance flag)")
    return EXIT_OK if all_ok and (ns.certified or args.allow_flagged) else EXIT_NUMERIC


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fiberwave", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--graph", required=True, help="graph JSON file")
        p.add_argument("--allow-flagged", action="store_true", help="exit 0 even if flagged")

    p = sub.add_parser("solve", help="solve one scattering problem")
    common(p)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--incident", help="channel,mode (default: all)")
    p.add_argument("--rcond-tol", type=float, default=RCOND_TOL)
    p.add_argument("--out", help="output JSON path (default: stdout)")

    p = sub.add_parser("sweep", help="lambda sweep to CSV")
    common(p)
    p.add_argument("--lo", type=float, required=True)
    p.add_argument("--hi", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--flag-tol", type=float, default=RCOND_TOL)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out", required=True, help="output CSV path")

    p = sub.add_parser("junction", help="compute a junction matrix from geometry")
    p.add_argument("--geometry", required=True, help="geometry JSON file")
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--h", type=float, help="override grid spacing")
    p.add_argument("--n-ev", type=int, default=8, help="retained evanescent modes")
    p.add_argument("--out", help="output JSON path (default: stdout)")

    p = sub.add_parser("network-validate", help="compare graph model against the 2-D solver")
    common(p)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--eps", required=True, help="comma-separated eps list")
    p.add_argument("--incident", help="channel,mode (default: all columns)")
    p.add_argument("--out", help="output CSV path (default: stdout)")

    p = sub.add_parser("check", help="run the property suite on a graph")
    common(p)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--tol", type=float, default=1e-10)
    return parser


_COMMANDS = {
    "solve": _cmd_solve,
    "sweep": _cmd_sweep,
    "junction": _cmd_junction,
    "network-validate": _cmd_network_validate,
    "check": _cmd_check,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "threads", None) is None and args.command == "sweep":
        args.threads = int(os.environ.get("FIBERWAVE_THREADS", "1"))
    try:
        return _COMMANDS[args.command](args)
    except (ParseError, GraphInvalid, GeometryInvalid) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INVALID
    except OSError as exc:
        sys.stderr.write(f"i/o error: {exc}\n")
        return EXIT_IO
    except (FiberwaveError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
