"""Command-line interface: energy reports, the approximation pipeline,
extremality tools, mesh rendering and the acceptance selftest.

All outputs are machine readable (CSV/JSON/SVG) and byte-identical across
identical invocations.  Exit codes: 0 success, 1 domain error, 2 usage.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

from . import __version__
from .acceptance import DEFAULT_SEED, run_all
from .approx import build_frames, convergence_experiment
from .errors import HstvError
from .extremal import decompose, is_extremal
from .fields import parse_field
from .htv import htv_cpwl
from .mesh import load_mesh, mesh_document, render_svg, save_mesh
from .schatten import INF


def _parse_p(text: str) -> float:
    if text.strip().lower() in ("inf", "infinity"):
        return INF
    try:
        p = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad Schatten exponent {text!r}")
    if not p >= 1:
        raise argparse.ArgumentTypeError("Schatten exponent must be >= 1")
    return p


def _parse_k_range(text: str) -> list[int]:
    if ".." in text:
        a, _, b = text.partition("..")
        lo, hi = int(a), int(b)
        if hi < lo:
            raise argparse.ArgumentTypeError(f"empty K range {text!r}")
        return list(range(lo, hi + 1))
    return [int(text)]


def _check_threads_env() -> None:
    raw = os.environ.get("HTV_THREADS")
    if raw is None:
        return
    try:
        n = int(raw)
    except ValueError:
        raise SystemExit(2)
    if n < 1:
        raise SystemExit(2)
    # Computation is deterministic and single-threaded; any positive cap is
    # honored trivially.


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hstv",
        description="Hessian-Schatten total variation toolbox for the unit square",
    )
    parser.add_argument("--version", action="version", version=f"hstv {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_htv = sub.add_parser("htv", help="CPWL energy of a mesh file")
    p_htv.add_argument("mesh", help="mesh JSON with values")
    p_htv.add_argument("--p", type=_parse_p, default=1.0)
    p_htv.add_argument("--report", choices=["csv"], default=None)
    p_htv.add_argument("--out", default=None, help="write the CSV report here")

    p_ap = sub.add_parser("approx", help="run the CPWL approximation pipeline")
    p_ap.add_argument("--field", required=True, help="field descriptor, e.g. quadratic:iso")
    p_ap.add_argument("--N", type=int, required=True, help="dyadic partition level")
    p_ap.add_argument("--K", type=_parse_k_range, required=True,
                      help="band level or range a..b")
    p_ap.add_argument("--mode", choices=["lcm", "paper"], default="lcm")
    p_ap.add_argument("--p", type=_parse_p, default=1.0)
    p_ap.add_argument("--ref-resolution", type=int, default=512)
    p_ap.add_argument("--out", default=None, help="write the CSV table here")
    p_ap.add_argument("--emit-mesh", default=None, metavar="DIR",
                      help="save the interpolant mesh JSON per K")
    p_ap.add_argument("--emit-svg", default=None, metavar="DIR",
                      help="render the mesh SVG per K")

    p_ex = sub.add_parser("extremal", help="extreme-point analysis")
    ex_sub = p_ex.add_subparsers(dest="subcommand", required=True)
    p_t = ex_sub.add_parser("test", help="extremality verdict for a mesh file")
    p_t.add_argument("mesh")
    p_t.add_argument("--tol", type=float, default=1e-9)
    p_d = ex_sub.add_parser("decompose", help="decompose into extremal directions")
    p_d.add_argument("mesh")
    p_d.add_argument("--tol", type=float, default=1e-8)
    p_d.add_argument("--out", required=True, help="decomposition JSON path")

    p_m = sub.add_parser("mesh", help="mesh utilities")
    m_sub = p_m.add_subparsers(dest="subcommand", required=True)
    p_r = m_sub.add_parser("render", help="render a mesh file as SVG")
    p_r.add_argument("mesh")
    p_r.add_argument("--out", required=True)

    p_s = sub.add_parser("selftest", help="run the acceptance suite")
    p_s.add_argument("--only", default=None,
                     help="comma-separated criterion numbers, e.g. 1,5")
    p_s.add_argument("--seed", type=int, default=DEFAULT_SEED)
    return parser


def _cmd_htv(args) -> int:
    g = load_mesh(args.mesh)
    report = htv_cpwl(g, args.p)
    if args.report == "csv":
        lines = ["edge,x1,y1,x2,y2,jump_norm,length,contribution"]
        fv = g.mesh.float_vertices
        for c in report.per_edge:
            u, v = c.edge
            jn = math.hypot(*c.jump)
            x1, y1 = (float(t) for t in fv[u])
            x2, y2 = (float(t) for t in fv[v])
            lines.append(
                f"{u}-{v},{x1!r},{y1!r},{x2!r},{y2!r},"
                f"{jn!r},{c.length!r},{c.contribution!r}"
            )
        text = "\n".join(lines) + "\n"
        if args.out:
            with open(args.out, "w") as f:
                f.write(text)
        else:
            sys.stdout.write(text)
    print(f"htv_total={report.total!r}")
    return 0


def _cmd_approx(args) -> int:
    fld = parse_field(args.field)
    frames = build_frames(fld, args.N)
    collected = {}

    def collect(K, plan, mesh, g):
        collected[K] = g

    table = convergence_experiment(
        fld, args.N, args.K, p=args.p, mode=args.mode,
        ref_resolution=args.ref_resolution, frames=frames,
        collect=collect if (args.emit_mesh or args.emit_svg) else None,
    )
    text = table.to_csv()
    if args.out:
        with open(args.out, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    for K, g in sorted(collected.items()):
        if args.emit_mesh:
            os.makedirs(args.emit_mesh, exist_ok=True)
            save_mesh(g, os.path.join(args.emit_mesh, f"mesh_K{K}.json"))
        if args.emit_svg:
            os.makedirs(args.emit_svg, exist_ok=True)
            render_svg(g, os.path.join(args.emit_svg, f"mesh_K{K}.svg"))
    return 0


def _cmd_extremal(args) -> int:
    g = load_mesh(args.mesh)
    if args.subcommand == "test":
        verdict, cert = is_extremal(g, args.tol)
        if verdict:
            print(f"extremal (dim={cert.space.dim})")
        else:
            print(f"not extremal (dim={cert.space.dim})")
        return 0
    dec = decompose(g, args.tol)
    doc = {
        "total": repr(dec.total),
        "residual": repr(dec.residual),
        "value_residual": repr(dec.value_residual),
        "coefficients": [repr(c) for c in dec.coefficients],
        "components": [mesh_document(t.cpwl) for t in dec.terms],
    }
    with open(args.out, "w") as f:
        json.dump(doc, f)
        f.write("\n")
    print(f"terms={len(dec.terms)} coefficient_sum={dec.coefficient_sum!r} "
          f"residual={dec.residual!r}")
    return 0


def _cmd_selftest(args) -> int:
    numbers = None
    if args.only:
        numbers = {int(tok) for tok in args.only.split(",")}
    results = run_all(numbers, seed=args.seed)
    for r in results:
        print(r.line())
    return 0 if all(r.passed for r in results) else 1


def main(argv=None) -> int:
    _check_threads_env()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "htv":
            return _cmd_htv(args)
        if args.command == "approx":
            return _cmd_approx(args)
        if args.command == "extremal":
            return _cmd_extremal(args)
        if args.command == "mesh":
            g = load_mesh(args.mesh)
            render_svg(g, args.out)
            return 0
        if args.command == "selftest":
            return _cmd_selftest(args)
    except HstvError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    parser.error("unknown command")
    return 2


if __name__ == "__main__":
    sys.exit(main())
