"""Shooting solver for the reduced singular Kähler-Einstein equation

    u'' v(u') = exp(-(2u + j)),   u'(0) = 0,   u'(R+) = [0, lambda_ac - s).

With ``w = V(u')`` the equation becomes the regular system
``u' = V^{-1}(w)``, ``w' = exp(-2u) J``.  The free datum is ``c = u(0)``;
the limit ``w(inf)`` decreases strictly in ``c`` and the solution is the one
with ``w(inf) = V(lambda_ac - s)``.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np

from . import kernels
from .criterion import threshold
from .datum import HorosymmetricDatum, require_valid
from .potentials import (
    Potentials,
    build,
    c_bounds,
    dj_array,
    eval_intJ,
    log_J_array,
    v_array,
)

__all__ = [
    "SolverConfig",
    "SolvedPotential",
    "NoSolution",
    "Trial",
    "SolverError",
    "IntegratorError",
    "MonotonicityError",
    "NearThresholdError",
    "solve",
    "residual",
    "volume_check",
    "volume_quadrature",
    "initial_guess",
]

log = logging.getLogger(__name__)

STATUS_NAMES = {0: "undershoot", 1: "overshoot", 2: "converged", 3: "xcap", 4: "step_underflow"}


class SolverError(RuntimeError):
    pass


class IntegratorError(SolverError):
    pass


class MonotonicityError(SolverError):
    pass


class NearThresholdError(SolverError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    rtol: float = 1e-10
    tol: float = 1e-9  # relative accuracy of w(inf) against the target
    tau_tail: float = 1e-12
    xmax_cap: Optional[float] = None  # default 200 / (1 - s)
    grid_step: float = 1.0 / 512
    near_threshold_guard: float = 1e-3
    c_span: float = 64.0
    xtol: float = 1e-12
    h0: float = 1e-3
    h_max: float = 0.5
    atol_U: float = 1e-16
    atol_w_rel: float = 1e-16

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass(frozen=True)
class Trial:
    c: float
    status: str
    x_end: float
    w_end: float
    tail_bound: float

    @property
    def w_inf_bounds(self) -> tuple[float, float]:
        if self.status == "overshoot":
            return (self.w_end, math.inf)
        return (self.w_end, self.w_end + self.tail_bound)


@dataclass
class NoSolution:
    s: float
    reason: str
    trials: list[Trial] = field(default_factory=list)

    def __bool__(self) -> bool:
        return False


@dataclass
class SolvedPotential:
    """Grid samples of the solution at cone parameter ``s``.

    ``u_rel = u - u(0)`` is stored separately from ``c_star = u(0)`` so the
    tiny deviations near the collapse keep full relative precision.
    """

    datum: HorosymmetricDatum
    potentials: Potentials
    s: float
    c_star: float
    x: np.ndarray
    u_rel: np.ndarray
    uprime: np.ndarray
    w: np.ndarray
    W_target: float
    config: SolverConfig
    trials: list[Trial] = field(default_factory=list)
    stats: dict = field(default_factory=dict)

    @property
    def lambda_ac(self) -> float:
        return float(self.datum.lambda_ac)

    @property
    def r(self) -> int:
        return self.datum.r

    @property
    def u(self) -> np.ndarray:
        return self.c_star + self.u_rel

    @property
    def X_max(self) -> float:
        return float(self.x[-1])

    def nu(self) -> np.ndarray:
        """``nu = 2u + j`` on the grid, ``+inf`` at ``x = 0``."""
        out = np.full_like(self.x, np.inf)
        pos = self.x > 0
        out[pos] = 2.0 * self.u[pos] - log_J_array(self.potentials.J, self.x[pos])
        return out

    def dnu(self) -> np.ndarray:
        out = np.full_like(self.x, -np.inf)
        pos = self.x > 0
        out[pos] = 2.0 * self.uprime[pos] + dj_array(self.potentials.J, self.x[pos])
        return out

    def tail_estimate(self) -> float:
        """``exp(-nu(X)) / nu'(X)``: bound on ``int_X^inf exp(-nu)`` by convexity."""
        nu_end = self.nu()[-1]
        dnu_end = self.dnu()[-1]
        return math.exp(-nu_end) / dnu_end if dnu_end > 0 else math.inf


def initial_guess(pot: Potentials, W_target: float) -> float:
    """Balance ``exp(-2c) int_0^{X0} J = W`` with ``X0 = 5 / lambda_max``."""
    X0 = 5.0 / float(pot.J.lam_max)
    return -0.5 * math.log(W_target / eval_intJ(pot.J, X0))


def _classify(mod, model, c, W, cfg, x_cap) -> Trial:
    status, x, U, w, tb, p, nsteps, nrej = mod.shoot(
        model, c, W, cfg.rtol, cfg.atol_U, cfg.atol_w_rel * W, cfg.tau_tail, x_cap, cfg.h0, cfg.h_max
    )
    name = STATUS_NAMES[status]
    if name == "step_underflow":
        raise IntegratorError(f"step size underflow at x={x:.6g} (c={c!r})")
    if name == "xcap":
        raise IntegratorError(
            f"trial c={c!r} not classified before x cap {x_cap:.6g} (w={w:.6g}, W={W:.6g})"
        )
    return Trial(float(c), name, float(x), float(w), float(tb))


def _check_monotone(trials: list[Trial], tol: float) -> None:
    ordered = sorted(trials, key=lambda t: t.c)
    seen_under = False
    for t in ordered:
        if t.status == "overshoot" and seen_under:
            raise MonotonicityError(
                "trial log not monotone: overshoot above an undershooting c "
                + ", ".join(f"{q.c:.12g}:{q.status}" for q in ordered)
            )
        if t.status != "overshoot":
            seen_under = True
    unders = [t for t in ordered if t.status != "overshoot"]
    for lo_t, hi_t in zip(unders, unders[1:]):
        # larger c must not have a clearly larger limit
        if hi_t.w_inf_bounds[0] > lo_t.w_inf_bounds[1] * (1 + tol):
            raise MonotonicityError(
                f"w(inf) increases from c={lo_t.c!r} to c={hi_t.c!r}"
            )


def solve(
    d: HorosymmetricDatum,
    s: float,
    *,
    config: Optional[SolverConfig] = None,
    c_init: Optional[float] = None,
    backend: Optional[str] = None,
    **overrides,
) -> Union[SolvedPotential, NoSolution]:
    """Solve at cone parameter ``s`` by bisection on ``c = u(0)``.

    Returns :class:`NoSolution` when every trial in the expanded bracket
    overshoots (or undershoots); never consults the existence criterion
    except for the near-threshold guard.
    """
    require_valid(d)
    s = float(s)
    if not (0.0 <= s < 1.0):
        raise ValueError(f"s={s} outside [0, 1)")
    cfg = replace(config or SolverConfig(), **overrides)
    t_start = time.perf_counter()

    if cfg.near_threshold_guard > 0:
        b = threshold(d).b
        if 0.0 <= b - s < cfg.near_threshold_guard:
            raise NearThresholdError(
                f"s={s} is within {cfg.near_threshold_guard:g} of the threshold b={b:.12g}; "
                "double precision cannot resolve the collapsing regime here"
            )

    mod = kernels.get_backend(backend)
    pot = build(d)
    cb = c_bounds(pot.v)
    model = kernels.make_model(pot, cb.C_minus1, mod)
    lam = d.lambda_ac
    W = float(pot.v.V_exact(lam - _exact(s)))
    x_cap = cfg.xmax_cap if cfg.xmax_cap is not None else 200.0 / (1.0 - s)

    c0 = initial_guess(pot, W) if c_init is None else float(c_init)
    trials: list[Trial] = []

    def run(c: float) -> Trial:
        t = _classify(mod, model, c, W, cfg, x_cap)
        trials.append(t)
        return t

    first = run(c0)
    step = 1.0
    if first.status == "overshoot":
        lo = c0
        while True:
            c = c0 + step
            t = run(c)
            if t.status != "overshoot":
                hi = c
                break
            lo = c
            step *= 2.0
            if step > cfg.c_span:
                return NoSolution(
                    s,
                    f"all trials overshoot up to c={c:.6g}: criterion fails at s={s} "
                    "(no conical Kähler-Einstein potential)",
                    trials,
                )
    else:
        hi = c0
        while True:
            c = c0 - step
            t = run(c)
            if t.status == "overshoot":
                lo = c
                break
            hi = c
            step *= 2.0
            if step > cfg.c_span:
                return NoSolution(s, f"all trials undershoot down to c={c:.6g}", trials)

    while hi - lo > cfg.xtol * (1.0 + abs(hi)):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        t = run(mid)
        if t.status == "overshoot":
            lo = mid
        else:
            hi = mid
    _check_monotone(trials, cfg.tol)

    status, xs, Us, ws, ps, nsteps, nrej = mod.integrate_grid(
        model, hi, W, cfg.grid_step, cfg.rtol, cfg.atol_U, cfg.atol_w_rel * W,
        cfg.tau_tail, x_cap, cfg.h0,
    )
    name = STATUS_NAMES[status]
    if name == "step_underflow":
        raise IntegratorError("step size underflow on the output grid")
    if name == "xcap":
        log.warning("s=%g: output grid reached the cap X=%g before the tail decayed", s, x_cap)

    sol = SolvedPotential(
        datum=d,
        potentials=pot,
        s=s,
        c_star=float(hi),
        x=np.asarray(xs, dtype=float),
        u_rel=np.asarray(Us, dtype=float),
        uprime=np.asarray(ps, dtype=float),
        w=np.asarray(ws, dtype=float),
        W_target=W,
        config=cfg,
        trials=trials,
        stats={
            "backend": mod.BACKEND,
            "n_trials": len(trials),
            "grid_steps": int(nsteps),
            "grid_rejected": int(nrej),
            "grid_status": name,
            "bracket": [float(lo), float(hi)],
            "elapsed_s": time.perf_counter() - t_start,
        },
    )
    # nu' tends to 2(1 - s), not to the range bound 1 - s quoted in some sources
    log.debug("s=%g: nu'(X)=%.6g vs asymptotic 2(1-s)=%.6g", s, float(sol.dnu()[-1]), 2.0 * (1.0 - s))
    err = volume_check(sol)
    if not err <= max(cfg.tol, 10 * cfg.tau_tail) * 10:
        return NoSolution(
            s, f"bracket collapsed at c={hi:.15g} with w(inf) off target by {err:.3g}", trials
        )
    return sol


def _exact(s: float):
    from fractions import Fraction

    return Fraction(repr(float(s)))


def residual(sol: SolvedPotential, floor: float = 1e-7) -> float:
    """Max of ``|u''_fd v(u') exp(2u + j) - 1|`` over interior grid points.

    ``u''`` is the central difference of the stored ``u'`` (second order on the
    uniform grid), independent of the integrator's right-hand side.  Points
    past the minimum of nu where ``exp(-nu) < floor * W`` are skipped: there
    ``u''`` is below the rounding level of the differenced ``u'``.
    """
    x, up = sol.x, sol.uprime
    n = len(x)
    if n < 18:
        raise ValueError("grid too coarse for the residual (need >= 16 interior points)")
    h = np.diff(x)
    if not np.allclose(h, h[0], rtol=1e-9, atol=0):
        raise ValueError("residual needs the uniform output grid")
    h = h[0]
    upp = (up[2:] - up[:-2]) / (2.0 * h)
    xi = x[1:-1]
    nu = sol.nu()[1:-1]
    keep = np.ones(len(xi), dtype=bool)
    i_min = int(np.argmin(nu))
    tail = np.exp(-nu) < floor * sol.W_target
    tail[: i_min + 1] = False
    if tail.any():
        keep[int(np.argmax(tail)):] = False
    if keep.sum() < 16:
        raise ValueError("grid too coarse for the residual (need >= 16 interior points)")
    vv = v_array(sol.potentials.v, up[1:-1])
    with np.errstate(over="ignore", invalid="ignore"):
        res = np.abs(upp * vv * np.exp(nu) - 1.0)
    return float(np.max(res[keep]))


def volume_check(sol: SolvedPotential) -> float:
    """Relative error of ``w(X) + tail`` against ``V(lambda_ac - s)``."""
    return abs(sol.w[-1] + sol.tail_estimate() - sol.W_target) / sol.W_target


def volume_quadrature(sol: SolvedPotential) -> float:
    """Same identity with ``int exp(-nu)`` recomputed from the grid values of ``u``."""
    from scipy.integrate import simpson

    with np.errstate(over="ignore"):
        e = np.exp(-sol.nu())
    total = simpson(e, x=sol.x) + sol.tail_estimate()
    return abs(total - sol.W_target) / sol.W_target
