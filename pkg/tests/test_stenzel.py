import math
from fractions import Fraction

import numpy as np
import pytest
from scipy.integrate import quad

from horoke.datum import HorosymmetricDatum, preset
from horoke.stenzel import limit_constant, solve_stenzel


def test_p2_closed_form():
    st = solve_stenzel(preset("P2_CONIC"), 1.0, x_max=5.0)
    assert np.max(np.abs(st.u - 2 * (np.cosh(st.x / 2) - 1))) <= 1e-8
    assert np.max(np.abs(st.uprime - np.sinh(st.x / 2))) <= 1e-8


def test_p1xp1_closed_form():
    # v0 = 2p, V0 = p^2 = int sinh(2x) / ... = (cosh 2x - 1)/2 = sinh^2 x
    st = solve_stenzel(preset("P1xP1_DIAG"), 1.0, x_max=4.0)
    assert np.max(np.abs(st.uprime - np.sinh(st.x))) <= 1e-12 * np.max(st.uprime)
    assert np.max(np.abs(st.u - (np.cosh(st.x) - 1))) <= 1e-10


@pytest.mark.parametrize("name", ["P2_CONIC", "BLOWUP_P2xP2", "SL3", "F4_SO9"])
@pytest.mark.parametrize("C", [0.1, 3.0])
def test_scaling_law(name, C):
    d = preset(name)
    one = solve_stenzel(d, 1.0, x_max=5.0)
    other = solve_stenzel(d, C, x_max=5.0)
    factor = C ** (1.0 / (d.r + 1))
    assert np.max(np.abs(other.u - factor * one.u) / np.maximum(1.0, other.u)) <= 1e-10


@pytest.mark.parametrize("name", ["BLOWUP_P2xP2", "SO3", "SP3"])
def test_ode_by_quadrature(name):
    d = preset(name)
    st = solve_stenzel(d, 0.7, x_max=3.0, step=0.25)
    prod_k = float(math.prod(t.k for t in d.s_terms))
    r = d.r
    for x, up in zip(st.x[1:], st.uprime[1:]):
        intJ, _ = quad(lambda t: math.prod(math.sinh(float(u.c) * t) for u in d.s_terms), 0, x, epsrel=1e-13)
        assert prod_k * up ** (r + 1) / (r + 1) == pytest.approx(0.7 * intJ, rel=1e-11)


def test_even_and_normalized():
    st = solve_stenzel(preset("SL3"), 2.0, x=np.array([0.0, 1e-3, 0.5]))
    assert st.u[0] == 0.0 and st.uprime[0] == 0.0
    # u ~ A x^2 near 0 (even extension is C^2)
    assert st.u[1] / 1e-6 == pytest.approx(st.uprime[1] / 2e-3, rel=1e-3)


def test_limit_constant():
    assert limit_constant(preset("P2_CONIC")) == 1
    assert limit_constant(preset("BLOWUP_P2xP2")) == Fraction(1, 9)


def test_errors():
    d = preset("P2_CONIC")
    with pytest.raises(ValueError):
        solve_stenzel(d, 0.0)
    with pytest.raises(ValueError):
        solve_stenzel(d, 1.0, x=np.array([0.1, 0.2]))
    with pytest.raises(ValueError):
        solve_stenzel(HorosymmetricDatum("bad", ()), 1.0)
