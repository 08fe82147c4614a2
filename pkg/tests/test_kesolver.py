import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from horoke.criterion import threshold
from horoke.datum import preset
from horoke.kesolver import (
    NearThresholdError,
    NoSolution,
    SolvedPotential,
    SolverConfig,
    residual,
    solve,
    volume_check,
    volume_quadrature,
)


def test_p2_closed_form_at_zero(p2_solutions):
    # s = 0: u = -ln 3 + (3/2) ln cosh x
    sol = p2_solutions[0.0]
    x = sol.x
    exact = -math.log(3.0) + 1.5 * np.log(np.cosh(x))
    assert sol.c_star == pytest.approx(-math.log(3.0), abs=1e-9)
    assert np.max(np.abs(sol.u - exact)) < 1e-8
    assert np.max(np.abs(sol.uprime - 1.5 * np.tanh(x))) < 1e-8


def test_p1xp1_closed_form_at_zero():
    sol = solve(preset("P1xP1_DIAG"), 0.0)
    x = sol.x
    exact = -math.log(2.0) + 2.0 * np.log(np.cosh(x))
    assert np.max(np.abs(sol.u - exact)) < 1e-8
    assert np.max(np.abs(sol.uprime - 2.0 * np.tanh(x))) < 1e-8


@pytest.mark.parametrize("s", [0.0, 0.3, 0.6, 0.74])
def test_volume_and_residual(p2_solutions, s):
    sol = p2_solutions[s]
    assert volume_check(sol) <= 1e-8
    assert volume_quadrature(sol) <= 1e-6
    assert residual(sol) <= 1e-5


@pytest.mark.parametrize("name", ["BLOWUP_P2xP2", "SL3", "SO3", "SP3", "F4_SO9"])
def test_other_presets_solve(name):
    d = preset(name)
    s = 0.5 * threshold(d).b
    sol = solve(d, s)
    assert isinstance(sol, SolvedPotential)
    assert volume_quadrature(sol) <= 1e-6
    assert residual(sol) <= 1e-4


def test_uniqueness_from_different_seeds(p2):
    a = solve(p2, 0.5, c_init=-10.0)
    b = solve(p2, 0.5, c_init=10.0)
    c = solve(p2, 0.5)
    assert a.c_star == pytest.approx(b.c_star, abs=1e-9)
    assert a.c_star == pytest.approx(c.c_star, abs=1e-9)


@pytest.mark.parametrize("name", ["P2_CONIC", "BLOWUP_P2xP2"])
@pytest.mark.parametrize("t", [0.5, 3.0])
def test_kappa_scale_equivariance(name, t):
    d = preset(name)
    s = 0.4 * threshold(d).b
    base = solve(d, s)
    sol = solve(d.scaled(t), s)
    shift = -(d.N / 2.0) * math.log(t)
    assert sol.c_star - base.c_star == pytest.approx(shift, abs=1e-8)
    n = min(len(sol.x), len(base.x))
    assert np.max(np.abs(sol.u_rel[:n] - base.u_rel[:n])) < 1e-8


@pytest.mark.parametrize("s", [0.0, 0.3, 0.6])
def test_structure_of_solution(p2_solutions, s):
    sol = p2_solutions[s]
    up = sol.uprime
    assert up[0] == 0.0 and sol.u_rel[0] == 0.0
    assert np.all(np.diff(up) > -1e-14)  # convex u
    assert np.all(up < sol.lambda_ac - s)
    assert np.all(np.diff(sol.w) >= 0)
    assert sol.w[-1] <= sol.W_target * (1 + 1e-9)
    # nu' tends to 2(1 - s)
    assert sol.dnu()[-1] == pytest.approx(2.0 * (1.0 - s), rel=1e-2)


def test_no_solution_past_threshold(p2):
    res = solve(p2, 0.8)
    assert isinstance(res, NoSolution) and not res
    assert "criterion fails" in res.reason
    assert res.trials and all(t.status == "overshoot" for t in res.trials)


def test_near_threshold_guard(p2):
    with pytest.raises(NearThresholdError):
        solve(p2, 0.7495)
    # the guard is a config value, so it can be tightened
    sol = solve(p2, 0.7495, near_threshold_guard=1e-4)
    assert isinstance(sol, SolvedPotential)
    assert volume_quadrature(sol) <= 1e-5


def test_bad_s(p2):
    with pytest.raises(ValueError):
        solve(p2, -0.1)
    with pytest.raises(ValueError):
        solve(p2, 1.0)


def test_config_overrides(p2):
    sol = solve(p2, 0.2, config=SolverConfig(grid_step=1 / 64), tol=1e-8)
    assert sol.config.grid_step == 1 / 64 and sol.config.tol == 1e-8
    assert sol.x[1] == pytest.approx(1 / 64)
    assert sol.config.to_json()["grid_step"] == 1 / 64


def test_residual_needs_uniform_grid(p2_solutions):
    sol = p2_solutions[0.3]
    import dataclasses

    bent = dataclasses.replace(sol, x=sol.x ** 1.01)
    with pytest.raises(ValueError):
        residual(bent)


def test_residual_detects_wrong_solution(p2_solutions):
    import dataclasses

    sol = p2_solutions[0.3]
    wrong = dataclasses.replace(sol, uprime=sol.uprime * 1.01)
    assert residual(wrong) > 1e-3


def test_trials_are_monotone(p2_solutions):
    sol = p2_solutions[0.5]
    over = [t.c for t in sol.trials if t.status == "overshoot"]
    under = [t.c for t in sol.trials if t.status != "overshoot"]
    assert max(over) < min(under)
    assert max(over) <= sol.c_star <= min(under)


def test_criterion_consistency():
    for name in ["P2_CONIC", "P1xP1_DIAG"]:
        d = preset(name)
        b = threshold(d).b
        assert isinstance(solve(d, b - 0.05), SolvedPotential)
        assert isinstance(solve(d, b + 0.05), NoSolution)


@settings(max_examples=8, deadline=None)
@given(s=st.floats(0.0, 0.73))
def test_random_s_identity(s):
    sol = solve(preset("P2_CONIC"), s)
    assert volume_quadrature(sol) <= 1e-6
    assert residual(sol) <= 1e-4


def test_constant_u_fake_is_rejected(p2_solutions):
    import dataclasses

    sol = p2_solutions[0.3]
    fake = dataclasses.replace(sol, uprime=np.zeros_like(sol.uprime), u_rel=np.zeros_like(sol.u_rel))
    assert residual(fake) == pytest.approx(1.0)


def test_truncation_tail_model(p2_solutions):
    import dataclasses

    sol = p2_solutions[0.3]
    W = sol.W_target
    deficit = (W - sol.w) / W
    i = int(np.argmax(deficit < 1e-4))  # first point with a 1e-4 tail
    cut = dataclasses.replace(sol, x=sol.x[: i + 1], u_rel=sol.u_rel[: i + 1],
                              uprime=sol.uprime[: i + 1], w=sol.w[: i + 1])
    tail = cut.tail_estimate() / W
    # tail bound is an upper bound, nearly sharp once nu is almost linear
    assert deficit[i] <= tail * (1 + 1e-9) + 1e-12
    assert deficit[i] >= 0.9 * tail
    assert volume_check(cut) <= 0.1 * deficit[i]


def test_monotonicity_violation_aborts():
    from horoke.kesolver import MonotonicityError, Trial, _check_monotone

    good = [Trial(0.0, "undershoot", 5.0, 1.0, 0.0), Trial(1.0, "undershoot", 5.0, 0.5, 0.0)]
    _check_monotone(good, 1e-9)
    bad = [Trial(0.0, "undershoot", 5.0, 0.5, 0.0), Trial(1.0, "undershoot", 5.0, 1.0, 0.0)]
    with pytest.raises(MonotonicityError):
        _check_monotone(bad, 1e-9)


def test_initial_guess_formula(p2):
    from horoke.kesolver import initial_guess
    from horoke.potentials import build, eval_intJ

    pot = build(p2)
    x0 = 5.0 / float(pot.J.lam_max)
    assert initial_guess(pot, 4.5) == pytest.approx(-0.5 * math.log(4.5 / eval_intJ(pot.J, x0)))
