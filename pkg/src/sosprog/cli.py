"""Command-line surface: solve, solve-robust, eval, check-sos, check-sosconvex.

One JSON report per invocation on stdout, a short human summary on stderr.
Exit codes: 0 optimal, 1 parse/validation error, 2 infeasible/unbounded or
unverified strict feasibility, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import datetime
import json
import sys

import numpy as np

from . import problemfile, relax, robust, soscert
from .sdp import SolverOptions, export_sdpa
from .ssafunc import CertificationError
from .spectra import SpectrahedronError

EXIT_OK = 0
EXIT_PARSE = 1
EXIT_INFEASIBLE = 2
EXIT_NUMERICAL = 3


def _solver_options(args, file_options) -> SolverOptions:
    tol = file_options.get("tol")
    if args.tol is not None:
        tol = args.tol
    kw = {}
    if tol is not None:
        kw["gap_tol"] = tol
        kw["feas_tol"] = tol
    max_iter = file_options.get("max_iter")
    if args.max_iter is not None:
        max_iter = args.max_iter
    if max_iter is not None:
        kw["max_iter"] = max_iter
    return SolverOptions(**kw)


def _emit(report: dict, args, summary: str) -> None:
    if not getattr(args, "no_timestamp", False):
        report["timestamp"] = datetime.datetime.now(
            datetime.timezone.utc).isoformat()
    print(json.dumps(report, sort_keys=True))
    print(summary, file=sys.stderr)


def _round(x, nd=12):
    if x is None:
        return None
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_round(v, nd) for v in x]
    return round(float(x), nd)


def _report_dict(rep: relax.SolveReport, args) -> dict:
    out = {
        "status": rep.status,
        "val_primal": _round(rep.val_primal),
        "val_dual": _round(rep.val_dual),
        "x_star": _round(rep.x_star),
        "margins": _round(rep.margins),
        "iterations": list(rep.iterations),
    }
    if not args.no_timestamp:
        out["wallclock_ms"] = rep.wallclock_ms
    if rep.warnings:
        out["warnings"] = rep.warnings
    return out


def _status_exit(rep: relax.SolveReport) -> int:
    if rep.status == "optimal":
        return EXIT_OK
    if rep.status == "infeasible_or_unbounded":
        return EXIT_INFEASIBLE
    return EXIT_NUMERICAL


def _load(path: str):
    try:
        return problemfile.load(path), None
    except json.JSONDecodeError as e:
        print(f"parse error at line {e.lineno} column {e.colno}: {e.msg}",
              file=sys.stderr)
    except problemfile.SchemaError as e:
        print(f"schema error: {e}", file=sys.stderr)
    except (CertificationError, SpectrahedronError, ValueError) as e:
        print(f"invalid problem: {e}", file=sys.stderr)
    except OSError as e:
        print(f"cannot read file: {e}", file=sys.stderr)
    return None, EXIT_PARSE


def _dump_sdp(path: str, prog) -> None:
    primal = relax.build_primal(prog)
    dual = relax.build_dual(prog)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(export_sdpa(primal.problem))
    stem, dot, ext = path.rpartition(".")
    dual_path = f"{stem}.dual.{ext}" if dot else f"{path}.dual"
    with open(dual_path, "w", encoding="utf-8") as fh:
        fh.write(export_sdpa(dual.problem))


def cmd_solve(args) -> int:
    parsed, err = _load(args.file)
    if parsed is None:
        return err
    if parsed.kind != "ssa":
        print("file holds a robust program; use solve-robust", file=sys.stderr)
        return EXIT_PARSE
    opts = relax.ProgramOptions(
        sdp=_solver_options(args, parsed.options),
        assume_slater=args.assume_slater,
        recovery=not args.no_recovery,
    )
    if args.dump_sdp:
        _dump_sdp(args.dump_sdp, parsed.program)
    try:
        rep = relax.solve_program(parsed.program, opts)
    except relax.SlaterError as e:
        _emit({"status": "slater_not_verified", "error": str(e)}, args,
              f"aborted: {e}")
        return EXIT_INFEASIBLE
    _emit(_report_dict(rep, args), args,
          f"{rep.status}: val={rep.val_dual:.6f} "
          f"x*={None if rep.x_star is None else np.round(rep.x_star, 6).tolist()}")
    return _status_exit(rep)


def cmd_solve_robust(args) -> int:
    parsed, err = _load(args.file)
    if parsed is None:
        return err
    if parsed.kind != "robust":
        print("file holds a plain program; use solve", file=sys.stderr)
        return EXIT_PARSE
    opts = relax.ProgramOptions(
        sdp=_solver_options(args, parsed.options),
        assume_slater=args.assume_slater,
        recovery=not args.no_recovery,
    )
    if args.dump_sdp:
        _dump_sdp(args.dump_sdp, robust.to_ssa_program(parsed.robust))
    try:
        rep, margins = robust.solve_robust(parsed.robust, opts, seed=args.seed)
    except relax.SlaterError as e:
        _emit({"status": "slater_not_verified", "error": str(e)}, args,
              f"aborted: {e}")
        return EXIT_INFEASIBLE
    out = _report_dict(rep, args)
    out["robust_margins"] = _round(margins)
    _emit(out, args,
          f"{rep.status}: val={rep.val_dual:.6f} worst sampled margin "
          f"{None if margins is None else float(np.max(margins))}")
    return _status_exit(rep)


def cmd_eval(args) -> int:
    parsed, err = _load(args.file)
    if parsed is None:
        return err
    try:
        x = np.array([float(v) for v in args.point.split(",")])
    except ValueError:
        print(f"bad point {args.point!r}; expected comma-separated numbers",
              file=sys.stderr)
        return EXIT_PARSE
    if x.size != parsed.n:
        print(f"point has dimension {x.size}, the file declares n={parsed.n}",
              file=sys.stderr)
        return EXIT_PARSE
    if parsed.kind == "ssa":
        values = [f.eval(x) for f in parsed.program.pieces()]
    else:
        rp = parsed.robust
        prog = robust.to_ssa_program(rp)
        values = [f.eval(x) for f in prog.pieces()]
    _emit({"values": _round(values)}, args,
          "values: " + ", ".join(f"{v:.6g}" for v in values))
    return EXIT_OK


def _cmd_check(args, convex: bool) -> int:
    try:
        f = problemfile.parse_poly_expr(args.poly)
    except problemfile.ExprError as e:
        print(f"parse error: {e}", file=sys.stderr)
        return EXIT_PARSE
    res = soscert.is_sos_convex(f) if convex else soscert.is_sos(f)
    out = {
        "query": "sos-convex" if convex else "sos",
        "verdict": res.verdict.value,
        "margin": res.margin,
    }
    if res.reason:
        out["reason"] = res.reason
    if args.gram and res.certificate is not None:
        out["gram"] = res.certificate.W.full().tolist()
        out["gram_monomials"] = [list(e) for e in res.certificate.monomials()]
    if args.decompose and res.certificate is not None:
        terms = soscert.extract_decomposition(res.certificate).terms
        out["decomposition"] = [str(t) for t in terms]
    _emit(out, args, f"{out['query']}: {res.verdict.value}"
          + (f" (margin {res.margin:.2e})" if res.margin is not None else ""))
    return EXIT_OK


def cmd_check_sos(args) -> int:
    return _cmd_check(args, convex=False)


def cmd_check_sosconvex(args) -> int:
    return _cmd_check(args, convex=True)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tol", type=float, default=None,
                   help="solver gap/feasibility tolerance")
    p.add_argument("--max-iter", type=int, default=None)
    p.add_argument("--assume-slater", action="store_true",
                   help="skip the strict-feasibility search")
    p.add_argument("--dump-sdp", metavar="PATH", default=None,
                   help="write the assembled problems in SDPA sparse format")
    p.add_argument("--no-recovery", action="store_true",
                   help="report values only, skip solution recovery")
    p.add_argument("--seed", type=int, default=0,
                   help="seed for verification sampling")
    p.add_argument("--no-timestamp", action="store_true",
                   help="omit timestamp and wallclock from the report")


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="sosprog",
        description="Exact SDP relaxations for SOS-convex semialgebraic programs",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve a program file")
    p.add_argument("file")
    _add_common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("solve-robust", help="solve a robust program file")
    p.add_argument("file")
    _add_common(p)
    p.set_defaults(func=cmd_solve_robust)

    p = sub.add_parser("eval", help="evaluate every function at a point")
    p.add_argument("file")
    p.add_argument("point", help="comma-separated coordinates")
    _add_common(p)
    p.set_defaults(func=cmd_eval)

    for name, fn in (("check-sos", cmd_check_sos),
                     ("check-sosconvex", cmd_check_sosconvex)):
        p = sub.add_parser(name, help=f"{name} of an inline polynomial")
        p.add_argument("poly", help="e.g. 'x1^4 - 2*x1^2 + 1'")
        p.add_argument("--gram", action="store_true",
                       help="include the Gram matrix")
        p.add_argument("--decompose", action="store_true",
                       help="include a sum-of-squares decomposition")
        p.add_argument("--no-timestamp", action="store_true")
        p.set_defaults(func=fn)

    args = ap.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
