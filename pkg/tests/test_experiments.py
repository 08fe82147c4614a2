import math

import numpy as np
import pytest

from horoke.datum import preset
from horoke.experiments import (
    DiagnosticsError,
    auto_s_values,
    bubble_distance,
    collapsing_check,
    diagnose,
    lemma_constants,
    sweep,
)
from horoke.kesolver import solve
from horoke.potentials import build, eval_j
from horoke.stenzel import solve_stenzel


def test_diagnose_p2_zero(p2_solutions):
    rep = diagnose(p2_solutions[0.0])
    assert rep.volume_rel_err <= 1e-6
    assert rep.convex_ok and rep.unique_min_ok and rep.lipschitz_ok
    # closed form: nu = -2 ln 3 + 3 ln cosh x - ln sinh x, minimum at tanh x = 1/sqrt 3
    x = rep.x_s
    assert x == pytest.approx(math.atanh(1 / math.sqrt(3)), abs=1e-9)
    m = -2 * math.log(3) + 3 * math.log(math.cosh(x)) - math.log(math.sinh(x))
    assert rep.m_s == pytest.approx(m, abs=1e-9)


def test_delta_interval_endpoints(p2_solutions):
    sol = p2_solutions[0.5]
    rep = diagnose(sol)
    nu = lambda t: 2 * (sol.c_star + np.interp(t, sol.x, sol.u_rel)) + eval_j(sol.potentials.J, t)
    for t in (rep.y_s - rep.delta_s, rep.y_s + rep.delta_s):
        assert nu(t) == pytest.approx(rep.m_s + 1, abs=1e-5)
    assert rep.y_s - rep.delta_s < rep.x_s < rep.y_s + rep.delta_s


def test_x_s_escapes(p2_solutions):
    assert diagnose(p2_solutions[0.74]).x_s > diagnose(p2_solutions[0.5]).x_s


def test_lemma_constants_p2():
    c = lemma_constants(build(preset("P2_CONIC")))
    # j(x) = -ln sinh x; level j(1) + 1 + 3
    assert -math.log(math.sinh(c.epsilon2)) == pytest.approx(-math.log(math.sinh(1)) + 4, rel=1e-12)
    assert c.C0 == pytest.approx(1 / 6)  # max of 4p on [0, 3/2]
    assert c.C_delta_env == pytest.approx(math.sqrt(6 * math.e))


@pytest.mark.parametrize("s", [0.55, 0.65, 0.72, 0.745])
def test_collapsing_envelope(p2_solutions, s):
    sol = p2_solutions[s]
    rep = diagnose(sol)
    res = collapsing_check(sol, 2.0, rep, clip=True)
    assert res.envelope_ok
    assert res.envelope_margin >= 0
    assert res.clipped == (rep.x_s < 2.0)


def test_collapsing_requires_M_below_x_s(p2_solutions):
    sol = p2_solutions[0.3]
    rep = diagnose(sol)
    assert rep.x_s < 2.0
    with pytest.raises(DiagnosticsError):
        collapsing_check(sol, 2.0, rep)


def test_collapsing_decreasing(p2_solutions):
    devs = [collapsing_check(p2_solutions[s], 2.0, clip=True).sup_dev for s in (0.5, 0.65, 0.74)]
    assert devs[0] > devs[1] > devs[2]


def test_bubble_distance_and_trend(p2_solutions):
    d = [bubble_distance(p2_solutions[s], M=2.0).distance for s in (0.6, 0.7, 0.74)]
    assert d[0] > d[1] > d[2]
    assert bubble_distance(p2_solutions[0.745], M=2.0).distance <= 0.05


def test_bubble_with_foreign_grid(p2_solutions):
    sol = p2_solutions[0.72]
    own = bubble_distance(sol, M=2.0).distance
    coarse = solve_stenzel(sol.datum, 1.0, x_max=3.0, step=1 / 32)
    assert bubble_distance(sol, coarse, M=2.0).distance == pytest.approx(own, abs=1e-6)
    short = solve_stenzel(sol.datum, 1.0, x_max=1.0)
    with pytest.raises(DiagnosticsError):
        bubble_distance(sol, short, M=2.0)


def test_fit_C_tends_to_limit(p2_solutions):
    fits = [bubble_distance(p2_solutions[s], M=2.0, fit_C=True) for s in (0.6, 0.72, 0.745)]
    for f in fits:
        assert f.distance_fit <= f.distance
    gaps = [abs(f.C_fit - 1.0) for f in fits]
    assert gaps[0] > gaps[1] > gaps[2]


def test_auto_values():
    s = auto_s_values(0.75, 8)
    assert s[0] == 0.0 and s[-1] == pytest.approx(0.745)
    gaps = 0.75 - np.array(s)
    assert np.allclose(gaps[1:] / gaps[:-1], gaps[1] / gaps[0])
    assert auto_s_values(0.75, 0) == []
    with pytest.raises(ValueError):
        auto_s_values(0.75, 4, gap_min=1.0)


def test_sweep_empty():
    res = sweep(preset("P2_CONIC"), [])
    assert res.rows == [] and res.verdicts()["n_rows"] == 0


def test_sweep_with_row_past_threshold():
    res = sweep(preset("P2_CONIC"), [0.3, 0.7, 0.8])
    assert [r.status for r in res.rows] == ["converged", "converged", "no_solution"]
    assert res.verdicts()["n_converged"] == 2


def test_sweep_near_threshold_row_errors():
    res = sweep(preset("P2_CONIC"), [0.5, 0.7499])
    assert res.rows[1].status == "error" and "threshold" in res.rows[1].message


def test_sweep_rejects_unsorted():
    with pytest.raises(ValueError):
        sweep(preset("P2_CONIC"), [0.5, 0.3])


@pytest.mark.parametrize("name", ["P2_CONIC", "BLOWUP_P2xP2"])
def test_auto_sweep_verdicts(name):
    res = sweep(preset(name), auto=8)
    v = res.verdicts()
    assert v["n_converged"] == 8
    for key in ("x_s_nondecreasing", "x_s_doubles", "m_s_bounded", "delta_envelope", "epsilon2",
                "volume_1e-5", "convex", "collapsing_envelope", "collapsing_decreasing",
                "bubbling_decreasing"):
        assert v[key], key
    assert v["linear_growth_violations"] == 0
    cd = [r.report.C_delta for r in res.converged]
    assert all(b >= a for a, b in zip(cd, cd[1:]))


def test_parallel_sweep_matches_serial():
    d = preset("P2_CONIC")
    a = sweep(d, [0.2, 0.5, 0.7], jobs=1)
    b = sweep(d, [0.2, 0.5, 0.7], jobs=3)
    for ra, rb in zip(a.rows, b.rows):
        assert ra.c_star == pytest.approx(rb.c_star, abs=1e-9)
        assert ra.report.x_s == pytest.approx(rb.report.x_s, abs=1e-8)


def test_diagnose_rejects_no_solution():
    with pytest.raises(DiagnosticsError):
        diagnose(solve(preset("P2_CONIC"), 0.9))
