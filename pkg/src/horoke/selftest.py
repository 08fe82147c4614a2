"""The P^2 acceptance battery behind ``horoke selftest``.

Each check is self-contained and returns a :class:`CheckResult`; the pytest
acceptance module asserts the same criteria independently.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from .criterion import threshold
from .datum import preset
from .experiments import bubble_distance, collapsing_check, diagnose, sweep
from .kesolver import NoSolution, SolvedPotential, residual, solve, volume_quadrature
from .potentials import build, c_bounds, eval_V, invert_V
from .stenzel import solve_stenzel

__all__ = ["CheckResult", "run_battery", "CHECKS"]


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    detail: str
    elapsed_s: float

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag} [{self.number}] {self.name}: {self.detail} ({self.elapsed_s:.2f} s)"


def _threshold():
    d = preset("P2_CONIC")
    res = threshold(d)
    ok = res.b_exact == Fraction(3, 4) and abs(res.b - 0.75) <= 1e-12
    return ok, f"b = {res.b!r}, exact {res.b_exact}"


_S2 = (0.0, 0.3, 0.6, 0.74)


def _volume_and_residual():
    d = preset("P2_CONIC")
    worst_v = worst_r = 0.0
    for s in _S2:
        sol = solve(d, s)
        if not isinstance(sol, SolvedPotential):
            return False, f"no solution at s={s}"
        worst_v = max(worst_v, volume_quadrature(sol))
        worst_r = max(worst_r, residual(sol))
    return worst_v <= 1e-5 and worst_r <= 1e-4, f"volume {worst_v:.2e}, residual {worst_r:.2e}"


def _consistency():
    parts, ok = [], True
    for name in ("P2_CONIC", "P1xP1_DIAG"):
        d = preset(name)
        b = threshold(d).b
        below = solve(d, b - 0.05)
        above = solve(d, b + 0.05)
        good = isinstance(below, SolvedPotential) and isinstance(above, NoSolution)
        ok &= good
        parts.append(f"{name} b={b:g} {'ok' if good else 'mismatch'}")
    return ok, ", ".join(parts)


_S5 = (0.55, 0.65, 0.72, 0.745)


def _collapse_and_bubble():
    d = preset("P2_CONIC")
    devs, dists, env_ok = [], [], True
    for s in _S5:
        sol = solve(d, s)
        rep = diagnose(sol)
        col = collapsing_check(sol, 2.0, rep, clip=True)
        env_ok &= col.envelope_ok
        devs.append(col.sup_dev)
        x = sol.x[sol.x <= 2.0]
        u_hat = math.exp(sol.c_star) * sol.u_rel[: len(x)]
        dists.append(float(np.max(np.abs(u_hat - 2.0 * (np.cosh(x / 2.0) - 1.0)))))
    dec = lambda v: all(b < a for a, b in zip(v, v[1:]))
    ok = env_ok and dec(devs) and dec(dists) and dists[-1] <= 0.05
    return ok, (
        "sup_dev " + " > ".join(f"{v:.3f}" for v in devs)
        + "; bubble " + " > ".join(f"{v:.3f}" for v in dists)
    )


def _stenzel():
    d = preset("P2_CONIC")
    st = solve_stenzel(d, 1.0, x_max=5.0)
    err = float(np.max(np.abs(st.u - 2.0 * (np.cosh(st.x / 2.0) - 1.0))))
    st3 = solve_stenzel(d, 3.0, x_max=5.0)
    scale = float(np.max(np.abs(st3.u - math.sqrt(3.0) * st.u) / np.maximum(1.0, st3.u)))
    return err <= 1e-8 and scale <= 1e-10, f"closed form {err:.1e}, scaling {scale:.1e}"


def _lemmas():
    parts, ok = [], True
    for name in ("P2_CONIC", "BLOWUP_P2xP2"):
        v = sweep(preset(name), auto=8, keep_solutions=False).verdicts()
        good = (
            v["n_converged"] == 8 and v["x_s_nondecreasing"] and v["x_s_doubles"]
            and v["delta_envelope"] and v["m_s_bounded"] and v["epsilon2"]
        )
        ok &= good
        parts.append(f"{name} x_s x{v['x_s_growth']:.2f}")
    return ok, ", ".join(parts)


def _invariance():
    ok, worst = True, 0.0
    for name in ("P2_CONIC", "BLOWUP_P2xP2"):
        d = preset(name)
        s = 0.5 * threshold(d).b
        base = solve(d, s)
        x_s = diagnose(base).x_s
        for t in (0.5, 3.0):
            dt = d.scaled(t)
            sol = solve(dt, s)
            shift = -(d.N / 2.0) * math.log(t)
            worst = max(
                worst,
                abs(sol.c_star - base.c_star - shift),
                abs(threshold(dt).b - threshold(d).b),
                abs(diagnose(sol).x_s - x_s),
            )
        pot = build(d)
        cb = c_bounds(pot.v)
        lam = float(d.lambda_ac)
        r1 = d.r + 1
        for p in np.linspace(0.0, lam, 201)[1:]:
            q = eval_V(pot.v, p)
            back = invert_V(pot.v, q, cb.C_minus1)
            ok &= abs(back - p) <= 1e-10 * max(1.0, p)
            ok &= q ** (1 / r1) / cb.C_minus1 <= p * (1 + 1e-12) and p <= cb.C_minus1 * q ** (1 / r1) * (1 + 1e-12)
    return ok and worst <= 1e-8, f"max equivariance defect {worst:.1e}"


CHECKS: list[tuple[int, str, Callable]] = [
    (1, "threshold 3/4", _threshold),
    (2, "volume identity and residual (criteria 2, 3)", _volume_and_residual),
    (4, "criterion-solver consistency", _consistency),
    (5, "collapsing and bubbling (criteria 5, 6)", _collapse_and_bubble),
    (7, "Stenzel closed form", _stenzel),
    (8, "lemma envelopes", _lemmas),
    (9, "invariance suite", _invariance),
]


def run_battery() -> list[CheckResult]:
    out = []
    for number, name, fn in CHECKS:
        t0 = time.perf_counter()
        try:
            passed, detail = fn()
        except Exception as exc:  # a crash is a failed check, not a crashed selftest
            passed, detail = False, f"{type(exc).__name__}: {exc}"
        out.append(CheckResult(number, name, bool(passed), detail, time.perf_counter() - t0))
    return out
