"""Diagnostics of the shifted potential ``nu = 2u + j`` and sweeps ``s -> b``.

Every lemma constant is computed from its explicit recipe so the qualitative
statements (minimum escaping to infinity, collapse on compacts, bubbling to a
Stenzel potential) become numeric checks.
"""
from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.interpolate import CubicHermiteSpline, PchipInterpolator
from scipy.optimize import brentq

from .criterion import threshold
from .datum import HorosymmetricDatum, require_valid
from .kesolver import (
    NoSolution,
    SolvedPotential,
    SolverConfig,
    SolverError,
    solve,
    volume_quadrature,
)
from .potentials import Potentials, c_bounds, eval_j, v_array
from .stenzel import StenzelPotential, limit_constant, solve_stenzel

__all__ = [
    "LemmaConstants",
    "lemma_constants",
    "DiagnosticsReport",
    "DiagnosticsError",
    "diagnose",
    "CollapsingResult",
    "collapsing_check",
    "BubbleResult",
    "bubble_distance",
    "SweepRow",
    "SweepResult",
    "auto_s_values",
    "sweep",
]

log = logging.getLogger(__name__)


class DiagnosticsError(ValueError):
    """Grid too short or otherwise unusable for the requested check."""


@dataclass(frozen=True)
class LemmaConstants:
    epsilon2: float
    C0: float
    C_delta_env: float
    C_minus1: float
    C_v: float


def lemma_constants(pot: Potentials) -> LemmaConstants:
    """Datum-level constants of the a-priori lemmas.

    ``epsilon2`` solves ``j(x) = j(1) + 1 + 2 lambda_ac`` on ``(0, 1)``.
    ``C0 = 1 / max v`` on the moment interval and the width constant of the
    ``delta_s`` bound is ``sqrt(e / C0)``.
    """
    lam = float(pot.v.lam_ac)
    level = eval_j(pot.J, 1.0) + 1.0 + 2.0 * lam
    g = lambda x: eval_j(pot.J, x) - level
    lo = 0.5
    while g(lo) < 0:
        lo *= 0.5
    eps2 = brentq(g, lo, 1.0, xtol=1e-15, rtol=1e-14)
    p = np.linspace(0.0, lam, 8193)
    vmax = float(v_array(pot.v, p).max())
    C0 = 1.0 / vmax
    cb = c_bounds(pot.v)
    return LemmaConstants(
        epsilon2=float(eps2),
        C0=C0,
        C_delta_env=math.sqrt(math.e / C0),
        C_minus1=cb.C_minus1,
        C_v=cb.C_v,
    )


@dataclass
class DiagnosticsReport:
    s: float
    m_s: float
    x_s: float
    y_s: float
    delta_s: float
    epsilon2: float
    epsilon2_ok: bool
    delta_bound: float
    delta_ok: bool
    lipschitz_ok: bool
    convex_ok: bool
    unique_min_ok: bool
    volume_rel_err: float
    C_delta: float
    l0: float
    l1: float
    growth_violations: int
    C_minus1: float

    def to_json(self) -> dict:
        return {k: (float(v) if isinstance(v, (np.floating,)) else v) for k, v in asdict(self).items()}


def _nu_spline(sol: SolvedPotential) -> CubicHermiteSpline:
    x = sol.x[1:]
    return CubicHermiteSpline(x, sol.nu()[1:], sol.dnu()[1:])


def diagnose(sol: SolvedPotential, C_delta: Optional[float] = None) -> DiagnosticsReport:
    """nu-geometry and lemma envelopes for one converged solution.

    ``C_delta`` is the running maximum of ``delta_s`` in an enclosing sweep;
    it defaults to this solution's own ``delta_s``.
    """
    if not isinstance(sol, SolvedPotential):
        raise DiagnosticsError("diagnose needs a converged SolvedPotential")
    x = sol.x
    nu = sol.nu()
    dnu = sol.dnu()
    consts = lemma_constants(sol.potentials)

    i_min = int(np.argmin(nu[1:])) + 1
    if i_min >= len(x) - 2:
        raise DiagnosticsError("grid ends before the minimum of nu")
    spl = _nu_spline(sol)
    # spline index is grid index minus one
    dspl = spl.derivative()
    k = i_min - 1
    if dnu[i_min] > 0 and k > 0:
        a, b = x[i_min - 1], x[i_min]
    else:
        a, b = x[i_min], x[i_min + 1]
    if dspl(a) < 0 < dspl(b):
        x_s = float(brentq(dspl, a, b, xtol=1e-14))
    else:
        x_s = float(x[i_min])
    m_s = float(spl(x_s))

    target = m_s + 1.0
    left = np.nonzero(nu[1 : i_min + 1] > target)[0]
    if left.size == 0:
        raise DiagnosticsError("nu does not rise by 1 to the left of x_s on the grid")
    il = left[-1] + 1
    right = np.nonzero(nu[i_min:] > target)[0]
    if right.size == 0:
        raise DiagnosticsError("grid too short: nu does not rise by 1 right of x_s")
    ir = right[0] + i_min
    f = lambda t: float(spl(t)) - target
    xl = float(brentq(f, x[il], x[il + 1], xtol=1e-14))
    xr = float(brentq(f, x[ir - 1], x[ir], xtol=1e-14))
    y_s = 0.5 * (xl + xr)
    delta_s = 0.5 * (xr - xl)
    if x[-1] < x_s + 10.0 * delta_s:
        log.warning("grid ends at %g, before x_s + 10 delta_s = %g", x[-1], x_s + 10 * delta_s)

    # convexity: second differences against rounding of nu itself
    inner = nu[1:]
    d2 = inner[2:] - 2.0 * inner[1:-1] + inner[:-2]
    convex_ok = bool(np.all(d2 >= -1e-12 * (1.0 + np.abs(inner[1:-1]))))
    tol_min = 1e-12 * (1.0 + abs(m_s))
    interior = inner[1:-1]
    n_local = int(np.sum((interior < inner[:-2] - tol_min) & (interior < inner[2:] - tol_min)))
    unique_min_ok = n_local <= 1

    up = sol.uprime
    lam_s = sol.lambda_ac - sol.s
    lipschitz_ok = bool(
        up[0] == 0.0 and np.all(up >= 0.0) and np.all(up < lam_s) and np.all(np.diff(up) >= -1e-14)
    )

    C_d = max(delta_s, C_delta or 0.0)
    l1 = 1.0 / (2.0 * C_d)
    l0 = m_s - 1.0
    lin = l1 * np.abs(x[1:] - x_s) + l0
    violations = int(np.sum(nu[1:] < lin - 1e-9 * (1.0 + np.abs(lin))))

    bound = consts.C_delta_env * math.exp(m_s / 2.0)
    return DiagnosticsReport(
        s=sol.s,
        m_s=m_s,
        x_s=x_s,
        y_s=y_s,
        delta_s=delta_s,
        epsilon2=consts.epsilon2,
        epsilon2_ok=bool(y_s - delta_s >= consts.epsilon2),
        delta_bound=bound,
        delta_ok=bool(delta_s <= bound),
        lipschitz_ok=lipschitz_ok,
        convex_ok=convex_ok,
        unique_min_ok=unique_min_ok,
        volume_rel_err=volume_quadrature(sol),
        C_delta=C_d,
        l0=l0,
        l1=l1,
        growth_violations=violations,
        C_minus1=consts.C_minus1,
    )


@dataclass
class CollapsingResult:
    M: float
    sup_dev: float
    envelope_ok: bool
    envelope_margin: float
    checked_up_to: float
    clipped: bool


def _restrict(x: np.ndarray, y: np.ndarray, M: float) -> tuple[np.ndarray, np.ndarray]:
    """Samples on ``[0, M]`` with ``M`` itself added by monotone interpolation."""
    if M > x[-1]:
        raise DiagnosticsError(f"grid ends at {x[-1]:g} < M={M:g}")
    n = int(np.searchsorted(x, M, side="right"))
    xs, ys = x[:n], y[:n]
    if xs[-1] < M:
        ym = float(PchipInterpolator(x[max(0, n - 4) : n + 4], y[max(0, n - 4) : n + 4])(M))
        xs = np.append(xs, M)
        ys = np.append(ys, ym)
    return xs, ys


def collapsing_check(
    sol: SolvedPotential,
    M: float = 2.0,
    report: Optional[DiagnosticsReport] = None,
    *,
    clip: bool = False,
) -> CollapsingResult:
    """``sup_[0,M] (u - u(0))`` and the pointwise envelope on ``[0, min(M, x_s)]``.

    The envelope is only proved up to ``x_s``; with ``clip=False`` an ``M``
    beyond ``x_s`` is an error.
    """
    rep = report or diagnose(sol)
    if M > rep.x_s and not clip:
        raise DiagnosticsError(f"M={M:g} exceeds x_s={rep.x_s:g}")
    xs, us = _restrict(sol.x, sol.u_rel, M)
    sup_dev = float(np.max(us))
    top = min(M, rep.x_s)
    xe, ue = _restrict(sol.x, sol.u_rel, top)
    r1 = sol.r + 1
    a = rep.l1 / r1
    pre = rep.C_minus1 * (math.exp(-rep.l0) / rep.l1) ** (1.0 / r1) * r1 / rep.l1
    env = pre * (np.exp(a * (xe - rep.x_s)) - math.exp(-a * rep.x_s))
    slack = env - ue
    ok = bool(np.all(ue >= -1e-14) and np.all(slack >= -1e-12))
    # x = 0 is a trivial 0 <= 0; the margin is reported over x > 0
    margin = float(np.min(slack[1:])) if slack.size > 1 else 0.0
    return CollapsingResult(
        M=M,
        sup_dev=sup_dev,
        envelope_ok=ok,
        envelope_margin=margin,
        checked_up_to=float(top),
        clipped=bool(top < M),
    )


@dataclass
class BubbleResult:
    distance: float
    C: float
    distance_fit: Optional[float] = None
    C_fit: Optional[float] = None


def bubble_distance(
    sol: SolvedPotential,
    sten: Optional[StenzelPotential] = None,
    M: float = 2.0,
    fit_C: bool = False,
) -> BubbleResult:
    """Sup distance on ``[0, M]`` between ``exp(2c/(r+1)) (u - c)`` and a Stenzel potential.

    Without ``sten`` the Stenzel potential with the limit constant is used.
    A Stenzel grid different from the solver grid is interpolated monotonically.
    """
    d = sol.datum
    r1 = sol.r + 1
    xs, us = _restrict(sol.x, sol.u_rel, M)
    u_hat = math.exp(2.0 * sol.c_star / r1) * us
    if sten is None:
        sten = solve_stenzel(d, float(limit_constant(d)), x=xs)
        u_st = sten.u
    elif sten.x.shape == xs.shape and np.array_equal(sten.x, xs):
        u_st = sten.u
    else:
        if sten.x[0] > 0 or sten.x[-1] < M:
            raise DiagnosticsError("Stenzel grid does not cover [0, M]")
        u_st = PchipInterpolator(sten.x, sten.u)(xs)
    res = BubbleResult(distance=float(np.max(np.abs(u_hat - u_st))), C=sten.C)
    if fit_C:
        # u_C = C^(1/(r+1)) u_1, so the fit is linear in alpha = C^(1/(r+1))
        u1 = u_st / sten.C ** (1.0 / r1)
        denom = float(u1 @ u1)
        alpha = float(u_hat @ u1) / denom if denom > 0 else 0.0
        res.C_fit = alpha**r1
        res.distance_fit = float(np.max(np.abs(u_hat - alpha * u1)))
    return res


@dataclass
class SweepRow:
    s: float
    status: str
    c_star: Optional[float] = None
    report: Optional[DiagnosticsReport] = None
    collapsing: Optional[CollapsingResult] = None
    bubble: Optional[BubbleResult] = None
    message: str = ""
    solution: Optional[SolvedPotential] = field(default=None, repr=False)

    def summary(self) -> dict:
        rep, col, bub = self.report, self.collapsing, self.bubble
        return {
            "s": self.s,
            "status": self.status,
            "c_star": self.c_star,
            "m_s": rep.m_s if rep else None,
            "x_s": rep.x_s if rep else None,
            "delta_s": rep.delta_s if rep else None,
            "sup_dev": col.sup_dev if col else None,
            "bubble_dist": bub.distance if bub else None,
        }


def _strictly_decreasing(vals: Sequence[float]) -> bool:
    return all(b < a for a, b in zip(vals, vals[1:]))


@dataclass
class SweepResult:
    label: str
    b: float
    rows: list[SweepRow]
    M: float

    @property
    def s_values(self) -> list[float]:
        return [r.s for r in self.rows]

    @property
    def converged(self) -> list[SweepRow]:
        return [r for r in self.rows if r.status == "converged"]

    def verdicts(self) -> dict:
        ok = self.converged
        reps = [r.report for r in ok]
        out: dict = {"n_rows": len(self.rows), "n_converged": len(ok)}
        if not reps:
            return out
        xs = [r.x_s for r in reps]
        ms = [abs(r.m_s) for r in reps]
        out["x_s_nondecreasing"] = all(b >= a for a, b in zip(xs, xs[1:]))
        out["x_s_growth"] = xs[-1] / xs[0]
        out["x_s_doubles"] = xs[-1] > 2.0 * xs[0]
        if len(reps) >= 3:
            band = 5.0 * (1.0 + max(ms[:3]))
            out["m_s_band"] = band
            out["m_s_bounded"] = max(ms) <= band
        out["delta_envelope"] = all(r.delta_ok for r in reps)
        out["epsilon2"] = all(r.epsilon2_ok for r in reps)
        out["volume_1e-5"] = all(r.volume_rel_err <= 1e-5 for r in reps)
        out["convex"] = all(r.convex_ok and r.unique_min_ok for r in reps)
        out["linear_growth_violations"] = sum(r.growth_violations for r in reps)
        out["collapsing_envelope"] = all(r.collapsing.envelope_ok for r in ok)
        tail = ok[-4:]
        if len(tail) >= 2:
            out["collapsing_decreasing"] = _strictly_decreasing([r.collapsing.sup_dev for r in tail])
            out["bubbling_decreasing"] = _strictly_decreasing([r.bubble.distance for r in tail])
        return out

    def summary_rows(self) -> list[dict]:
        return [r.summary() for r in self.rows]


def auto_s_values(
    b: float, count: int, gap_min: float = 5e-3, gap_max: Optional[float] = None
) -> list[float]:
    """``count`` values ``s = b - g`` with gaps geometric from ``gap_max`` down to ``gap_min``."""
    if count <= 0:
        return []
    gap_max = b if gap_max is None else gap_max
    if not 0 < gap_min <= gap_max <= b:
        raise ValueError("need 0 < gap_min <= gap_max <= b")
    if count == 1:
        return [max(0.0, b - gap_min)]
    gaps = gap_max * (gap_min / gap_max) ** (np.arange(count) / (count - 1))
    return [max(0.0, float(b - g)) for g in gaps]


def _solve_one(args):
    d, s, cfg, c_init = args
    try:
        return solve(d, s, config=cfg, c_init=c_init)
    except (SolverError, ValueError) as exc:
        return exc


def sweep(
    d: HorosymmetricDatum,
    s_list: Optional[Sequence[float]] = None,
    *,
    auto: Optional[int] = None,
    gap_min: float = 5e-3,
    gap_max: Optional[float] = None,
    M: float = 2.0,
    fit_C: bool = False,
    jobs: Optional[int] = None,
    config: Optional[SolverConfig] = None,
    keep_solutions: bool = True,
) -> SweepResult:
    """Solve, diagnose, and run the collapsing and bubbling checks along ``s``.

    Sequential runs seed each solve from the previous ``c_star``; with
    ``jobs > 1`` the solves run in parallel without seeding (results are the
    same to solver tolerance).
    """
    require_valid(d)
    b = threshold(d).b
    if s_list is None:
        s_list = auto_s_values(b, auto or 0, gap_min, gap_max)
    s_vals = [float(s) for s in s_list]
    if any(t <= s for s, t in zip(s_vals, s_vals[1:])):
        raise ValueError("s values must be strictly increasing")
    cfg = config or SolverConfig()
    if jobs is None:
        jobs = int(os.environ.get("HOROKE_JOBS", "1") or 1)

    results: list = []
    if jobs > 1 and len(s_vals) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_solve_one, [(d, s, cfg, None) for s in s_vals]))
    else:
        c_prev = None
        for s in s_vals:
            res = _solve_one((d, s, cfg, c_prev))
            if isinstance(res, SolvedPotential):
                c_prev = res.c_star
            results.append(res)

    rows: list[SweepRow] = []
    C_delta = 0.0
    for s, res in zip(s_vals, results):
        if isinstance(res, NoSolution):
            rows.append(SweepRow(s, "no_solution", message=res.reason))
            continue
        if isinstance(res, Exception):
            rows.append(SweepRow(s, "error", message=f"{type(res).__name__}: {res}"))
            continue
        try:
            probe = diagnose(res)
            C_delta = max(C_delta, probe.delta_s)
            rep = diagnose(res, C_delta)
            col = collapsing_check(res, M, rep, clip=True)
            bub = bubble_distance(res, None, M, fit_C)
        except DiagnosticsError as exc:
            rows.append(SweepRow(s, "error", c_star=res.c_star, message=str(exc)))
            continue
        rows.append(
            SweepRow(
                s, "converged", res.c_star, rep, col, bub,
                solution=res if keep_solutions else None,
            )
        )
    return SweepResult(label=d.label, b=b, rows=rows, M=M)
