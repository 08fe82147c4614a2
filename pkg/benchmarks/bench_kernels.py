"""Compare the compiled and pure-Python kernels on single shots and full solves.

    python benchmarks/bench_kernels.py [--repeat N] [--json out.json]
"""
from __future__ import annotations

import argparse
import json
import statistics
import sys
import time
from fractions import Fraction

from horoke import kernels
from horoke.datum import preset
from horoke.kesolver import SolverConfig, solve
from horoke.potentials import build, c_bounds

CASES = [("P2_CONIC", 0.5), ("P2_CONIC", 0.74), ("BLOWUP_P2xP2", 0.4), ("F4_SO9", 0.3)]


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times), statistics.median(times)


def bench_case(name, s, repeat, backends):
    d = preset(name)
    pot = build(d)
    cb = c_bounds(pot.v)
    cfg = SolverConfig()
    W = float(pot.v.V_exact(d.lambda_ac - Fraction(repr(s))))
    c_star = solve(d, s).c_star
    row = {"datum": name, "s": s}
    for b in backends:
        mod = kernels.get_backend(b)
        model = kernels.make_model(pot, cb.C_minus1, mod)
        x_cap = 200.0 / (1.0 - s)

        def shot():
            mod.shoot(model, c_star + 1e-6, W, cfg.rtol, cfg.atol_U, cfg.atol_w_rel * W,
                      cfg.tau_tail, x_cap, cfg.h0, cfg.h_max)

        def full():
            solve(d, s, backend=b)

        row[f"{b}_shot_s"], _ = _best(shot, repeat)
        row[f"{b}_solve_s"], _ = _best(full, max(1, repeat // 3) if b == "python" else repeat)
    if "python" in backends and "cython" in backends:
        row["shot_speedup"] = row["python_shot_s"] / row["cython_shot_s"]
        row["solve_speedup"] = row["python_solve_s"] / row["cython_solve_s"]
    return row


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", help="write rows to this file")
    args = ap.parse_args(argv)

    backends = ["python"]
    if kernels._load_compiled() is not None:
        backends.append("cython")
    else:
        print("compiled kernels unavailable; timing the Python fallback only", file=sys.stderr)

    rows = [bench_case(n, s, args.repeat, backends) for n, s in CASES]
    head = f"{'datum':<14}{'s':>6}" + "".join(f"{b + ' shot':>14}{b + ' solve':>14}" for b in backends)
    if len(backends) == 2:
        head += f"{'x shot':>9}{'x solve':>9}"
    print(head)
    for r in rows:
        line = f"{r['datum']:<14}{r['s']:>6.2f}"
        for b in backends:
            line += f"{r[b + '_shot_s'] * 1e3:>11.2f} ms{r[b + '_solve_s'] * 1e3:>11.1f} ms"
        if len(backends) == 2:
            line += f"{r['shot_speedup']:>9.1f}{r['solve_speedup']:>9.1f}"
        print(line)
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
