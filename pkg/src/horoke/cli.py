"""Command line entry point: ``horoke <subcommand> ...``.

Exit codes: 0 success, 1 invalid datum, 2 solver failure, 64 usage error.
Every file written carries a run manifest (``#``-prefixed JSON line in CSV,
a ``manifest`` key in JSON).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import platform
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__, kernels
from .criterion import NoKahlerEinsteinError, threshold
from .datum import (
    InvalidDatumError,
    dumps_datum,
    load_datum,
    preset,
    validate,
)
from .kesolver import (
    NoSolution,
    SolverConfig,
    SolverError,
    residual,
    solve,
    volume_check,
)
from .potentials import build, eval_intJ, eval_J, eval_V, eval_v

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_SOLVER = 2
EXIT_USAGE = 64

DETERMINISM_NOTE = (
    "no random numbers are used; identical flags, datum and backend reproduce "
    "every number bit-for-bit on the same platform"
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class RunManifest:
    command: str
    flags: dict
    datum_label: Optional[str] = None
    datum_hash: Optional[str] = None
    backend: str = field(default_factory=lambda: kernels.BACKEND)
    started: float = field(default_factory=time.time)
    elapsed_s: float = 0.0
    results: dict = field(default_factory=dict)

    def finish(self) -> "RunManifest":
        self.elapsed_s = time.time() - self.started
        return self

    def to_json(self) -> dict:
        return {
            "tool": "horoke",
            "version": __version__,
            "command": self.command,
            "flags": self.flags,
            "datum_label": self.datum_label,
            "datum_hash": self.datum_hash,
            "backend": self.backend,
            "python": platform.python_version(),
            "platform": platform.platform(),
            "determinism": DETERMINISM_NOTE,
            "elapsed_s": self.elapsed_s,
            "results": self.results,
        }


def _clean(obj):
    """JSON-safe copy: Fractions become strings, non-finite floats become None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _dump_json(payload: dict, manifest: RunManifest) -> str:
    doc = {"manifest": manifest.finish().to_json(), **payload}
    return json.dumps(_clean(doc), indent=2, ensure_ascii=False) + "\n"


def _csv_text(header: Sequence[str], rows, manifest: RunManifest) -> str:
    buf = io.StringIO()
    buf.write("# " + json.dumps(_clean(manifest.finish().to_json()), ensure_ascii=False) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _emit(text: str, path: Optional[str]) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _load(args):
    name = getattr(args, "preset", None)
    src = getattr(args, "datum", None)
    if name and src:
        raise UsageError("give either a datum file or --preset, not both")
    if name:
        return preset(name)
    if not src:
        raise UsageError("a datum file or --preset NAME is required")
    if not Path(src).exists():
        try:
            return preset(src)
        except KeyError:
            raise InvalidDatumError(f"no such datum file or preset: {src}") from None
    return load_datum(src)


def _add_datum(p: argparse.ArgumentParser) -> None:
    p.add_argument("datum", nargs="?", help="datum config file (or a preset name)")
    p.add_argument("--preset", help="built-in datum, e.g. P2_CONIC or SO_family(3)")


def _add_solver(p: argparse.ArgumentParser) -> None:
    d = SolverConfig()
    p.add_argument("--tol", type=float, default=d.tol, help="relative target |w(inf) - W|/W")
    p.add_argument("--rtol", type=float, default=d.rtol, help="integrator relative tolerance")
    p.add_argument("--tau-tail", type=float, default=d.tau_tail)
    p.add_argument("--xmax-cap", type=float, default=None, help="default 200/(1-s)")
    p.add_argument("--grid-step", type=float, default=d.grid_step)
    p.add_argument("--near-threshold-guard", type=float, default=d.near_threshold_guard)
    p.add_argument("--backend", choices=("python", "cython"), default=None)


def _config(args) -> SolverConfig:
    return SolverConfig(
        rtol=args.rtol,
        tol=args.tol,
        tau_tail=args.tau_tail,
        xmax_cap=args.xmax_cap,
        grid_step=args.grid_step,
        near_threshold_guard=args.near_threshold_guard,
    )


def _flags(args) -> dict:
    return {k: v for k, v in vars(args).items() if k != "func"}


def _manifest(args, d=None) -> RunManifest:
    m = RunManifest(command=args.command, flags=_flags(args))
    if d is not None:
        m.datum_label = d.label
        m.datum_hash = d.digest()
    if getattr(args, "backend", None):
        m.backend = args.backend
    return m


# datum ---------------------------------------------------------------------

def cmd_datum(args) -> int:
    if args.action == "validate":
        d = load_datum(args.target)
        rep = validate(d)
        if rep.ok:
            print(f"{d.label}: valid (r={d.r}, lambda_ac={d.lambda_ac}, N={d.N})")
            return EXIT_OK
        for v in rep.violations:
            print(f"{d.label}: {v}", file=sys.stderr)
        return EXIT_INVALID
    d = preset(args.target)
    _emit(dumps_datum(d), args.emit)
    return EXIT_OK


# tables --------------------------------------------------------------------

def cmd_tables(args) -> int:
    d = _load(args)
    pot = build(d)
    lam = float(d.lambda_ac)
    m = _manifest(args, d)
    n = args.grid
    ps = np.linspace(0.0, lam, n + 1)
    dens = [(p, eval_v(pot.v, p), eval_V(pot.v, p)) for p in ps]
    xs = np.linspace(0.0, args.x_max, n + 1)
    sinh = [(x, eval_J(pot.J, x), eval_intJ(pot.J, x)) for x in xs]
    t_dens = _csv_text(("p", "v", "V"), dens, m)
    t_sinh = _csv_text(("x", "J", "intJ"), sinh, m)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "density.csv").write_text(t_dens, encoding="utf-8")
        (out / "sinh.csv").write_text(t_sinh, encoding="utf-8")
    else:
        sys.stdout.write(t_dens + "\n" + t_sinh)
    return EXIT_OK


# threshold -----------------------------------------------------------------

def cmd_threshold(args) -> int:
    d = _load(args)
    try:
        res = threshold(d, sign=args.criterion_sign)
    except NoKahlerEinsteinError as exc:
        print(f"{d.label}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    if args.json:
        sys.stdout.write(_dump_json({"datum": d.to_dict(), **res.to_json()}, _manifest(args, d)))
    else:
        exact = f" (exact {res.b_exact})" if res.b_exact is not None else ""
        capped = " [capped at 1]" if res.b_is_capped else ""
        print(f"b = {res.b:.15g}{exact}{capped}")
    return EXIT_OK


# solve ---------------------------------------------------------------------

def _solution_rows(sol):
    nu = sol.nu()  # +inf at x = 0
    return zip(sol.x, sol.u, sol.uprime, sol.w, nu)


def cmd_solve(args) -> int:
    d = _load(args)
    cfg = _config(args)
    try:
        sol = solve(d, args.s, config=cfg, backend=args.backend)
    except SolverError as exc:
        print(f"horoke solve: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    if isinstance(sol, NoSolution):
        b = threshold(d).b
        print(
            f"horoke solve: no solution at s={args.s} ({sol.reason}); "
            f"the existence criterion fails for s >= b = {b:.12g}",
            file=sys.stderr,
        )
        return EXIT_SOLVER
    m = _manifest(args, d)
    res = residual(sol) if len(sol.x) > 20 else math.nan
    header = {
        "s": sol.s,
        "c_star": sol.c_star,
        "W_target": sol.W_target,
        "residual": res,
        "volume_check": volume_check(sol),
        "X_max": sol.X_max,
        "n_points": int(len(sol.x)),
        "solver": sol.config.to_json(),
        "stats": sol.stats,
    }
    if args.out == "json":
        payload = {"solution": header, "x": sol.x.tolist(), "u": sol.u.tolist(),
                   "uprime": sol.uprime.tolist(), "w": sol.w.tolist()}
        text = _dump_json(payload, m)
    else:
        m.results = header
        text = _csv_text(("x", "u", "uprime", "w", "nu"), _solution_rows(sol), m)
    _emit(text, args.output)
    print(
        f"s={sol.s:g} c_star={sol.c_star:.15g} residual={res:.3g} "
        f"volume_check={header['volume_check']:.3g}",
        file=sys.stderr,
    )
    return EXIT_OK


# stenzel -------------------------------------------------------------------

def cmd_stenzel(args) -> int:
    from .stenzel import limit_constant, solve_stenzel

    d = _load(args)
    C = float(limit_constant(d)) if args.C == "auto" else float(args.C)
    if not C > 0:
        raise UsageError("--C must be positive")
    st = solve_stenzel(d, C, x_max=args.x_max, step=args.grid_step)
    m = _manifest(args, d)
    m.results = {"C": C}
    _emit(_csv_text(("x", "u", "uprime"), zip(st.x, st.u, st.uprime), m), args.output)
    return EXIT_OK


# sweep ---------------------------------------------------------------------

SUMMARY_COLUMNS = ("s", "status", "c_star", "m_s", "x_s", "delta_s", "sup_dev", "bubble_dist")


def cmd_sweep(args) -> int:
    from .experiments import sweep
    from .stenzel import limit_constant, solve_stenzel

    d = _load(args)
    if args.auto is None and not args.s:
        raise UsageError("give --auto COUNT or --s VALUES")
    jobs = args.jobs if args.jobs is not None else int(os.environ.get("HOROKE_JOBS", "1") or 1)
    res = sweep(
        d,
        args.s if args.s else None,
        auto=args.auto,
        gap_min=args.gap_min,
        M=args.M,
        fit_C=args.fit_C,
        jobs=jobs,
        config=_config(args),
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    m = _manifest(args, d)
    C = float(limit_constant(d))
    long_rows = []
    for i, row in enumerate(res.rows):
        sol = row.solution
        if sol is None:
            continue
        (out / f"solution_{i:02d}.csv").write_text(
            _csv_text(("x", "u", "uprime", "w", "nu"), _solution_rows(sol), m), encoding="utf-8"
        )
        n = int(np.searchsorted(sol.x, args.M, side="right"))
        xs = sol.x[:n]
        u_hat = math.exp(2.0 * sol.c_star / (sol.r + 1)) * sol.u_rel[:n]
        u_st = solve_stenzel(d, C, x=xs).u
        nu = sol.nu()[:n]
        for x, a, b_, c_ in zip(xs, sol.u_rel[:n], u_hat, u_st):
            long_rows += [(row.s, x, "u_rel", a), (row.s, x, "u_hat", b_), (row.s, x, "u_stenzel", c_)]
        long_rows += [(row.s, x, "nu", v) for x, v in zip(xs[1:], nu[1:])]
    summary = [[r.get(k) for k in SUMMARY_COLUMNS] for r in res.summary_rows()]
    (out / "summary.csv").write_text(_csv_text(SUMMARY_COLUMNS, summary, m), encoding="utf-8")
    (out / "long.csv").write_text(_csv_text(("s", "x", "variable", "value"), long_rows, m), encoding="utf-8")
    verdicts = res.verdicts()
    rows_json = []
    for r in res.rows:
        item = r.summary()
        item["message"] = r.message
        if r.report is not None:
            item["diagnostics"] = r.report.to_json()
        if r.bubble is not None and r.bubble.C_fit is not None:
            item["bubble_fit"] = {"C_fit": r.bubble.C_fit, "distance_fit": r.bubble.distance_fit}
        if r.collapsing is not None:
            item["collapsing"] = {
                "envelope_ok": r.collapsing.envelope_ok,
                "checked_up_to": r.collapsing.checked_up_to,
                "clipped": r.collapsing.clipped,
            }
        rows_json.append(item)
    payload = {"label": res.label, "b": res.b, "M": res.M, "rows": rows_json, "verdicts": verdicts}
    (out / "verdict.json").write_text(_dump_json(payload, m), encoding="utf-8")
    for r in res.summary_rows():
        print(", ".join(f"{k}={_fmt(r.get(k))}" for k in SUMMARY_COLUMNS))
    failed = [r for r in res.rows if r.status != "converged"]
    return EXIT_SOLVER if failed and len(failed) == len(res.rows) else EXIT_OK


# selftest ------------------------------------------------------------------

def cmd_selftest(args) -> int:
    from .selftest import run_battery

    results = run_battery()
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_SOLVER


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="horoke", description="Conical Kähler-Einstein potentials on rank-one horosymmetric spaces")
    p.add_argument("--version", action="version", version=f"horoke {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser, metavar="COMMAND")
    sub.required = True

    sp = sub.add_parser("datum", help="validate a datum file or print a preset")
    sp.add_argument("action", choices=("validate", "preset"))
    sp.add_argument("target", help="file to validate or preset name")
    sp.add_argument("--emit", help="write the preset config to this file")
    sp.set_defaults(func=cmd_datum)

    sp = sub.add_parser("tables", help="dump (p, v, V) and (x, J, int J) as CSV")
    _add_datum(sp)
    sp.add_argument("--grid", type=int, default=64, help="number of intervals")
    sp.add_argument("--x-max", type=float, default=5.0)
    sp.add_argument("--out", help="directory for density.csv and sinh.csv (default stdout)")
    sp.set_defaults(func=cmd_tables)

    sp = sub.add_parser("threshold", help="existence threshold b")
    _add_datum(sp)
    sp.add_argument("--criterion-sign", choices=("corrected", "literal"), default="corrected")
    sp.add_argument("--json", action="store_true")
    sp.set_defaults(func=cmd_threshold)

    sp = sub.add_parser("solve", help="solve at one cone parameter s")
    _add_datum(sp)
    sp.add_argument("--s", type=float, required=True)
    _add_solver(sp)
    sp.add_argument("--out", choices=("csv", "json"), default="csv")
    sp.add_argument("-o", "--output", help="output file (default stdout)")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("stenzel", help="Stenzel potential on a uniform grid")
    _add_datum(sp)
    sp.add_argument("--C", default="auto", help="'auto' (limit constant) or a positive value")
    sp.add_argument("--x-max", type=float, default=5.0)
    sp.add_argument("--grid-step", type=float, default=1.0 / 64)
    sp.add_argument("--out", choices=("csv",), default="csv")
    sp.add_argument("-o", "--output", help="output file (default stdout)")
    sp.set_defaults(func=cmd_stenzel)

    sp = sub.add_parser("sweep", help="collapsing and bubbling sweep s -> b")
    _add_datum(sp)
    sp.add_argument("--auto", type=int, help="number of geometrically spaced s values")
    sp.add_argument("--s", type=float, nargs="+", help="explicit increasing s values")
    sp.add_argument("--gap-min", type=float, default=5e-3, help="smallest b - s of --auto")
    sp.add_argument("--M", type=float, default=2.0)
    sp.add_argument("--fit-C", action="store_true")
    sp.add_argument("--jobs", type=int, default=None, help="parallel solves (env HOROKE_JOBS)")
    sp.add_argument("--out", required=True, help="output directory")
    _add_solver(sp)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("selftest", help="run the P^2 acceptance battery")
    sp.set_defaults(func=cmd_selftest)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"horoke: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InvalidDatumError, KeyError) as exc:
        print(f"horoke: invalid datum: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (SolverError, NoKahlerEinsteinError) as exc:
        print(f"horoke: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        print(f"horoke: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
