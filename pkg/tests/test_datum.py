import itertools
from fractions import Fraction

import numpy as np
import pytest

from horoke.datum import (
    HorosymmetricDatum,
    InvalidDatumError,
    SymmetricRootTerm,
    UnipotentRootTerm,
    derived,
    dumps_datum,
    loads_datum,
    preset,
    require_valid,
    so_family,
    sl_family,
    sp_family,
    to_fraction,
    validate,
)


# -- independent root-system oracle ------------------------------------------
#
# Positive restricted roots are the roots with positive pairing against the
# direction gamma; c is 2<beta,gamma>/<gamma,gamma> and k the pairing in the
# form where short roots have squared length 2.

def roots_B(m):
    e = np.eye(m)
    out = [s * e[i] for i in range(m) for s in (1, -1)]
    for i, j in itertools.combinations(range(m), 2):
        for si, sj in itertools.product((1, -1), repeat=2):
            out.append(si * e[i] + sj * e[j])
    return out, 2.0  # short roots e_i have length 1


def roots_D(m):
    e = np.eye(m)
    out = []
    for i, j in itertools.combinations(range(m), 2):
        for si, sj in itertools.product((1, -1), repeat=2):
            out.append(si * e[i] + sj * e[j])
    return out, 1.0


def roots_A(n):
    e = np.eye(n + 1)
    return [e[i] - e[j] for i in range(n + 1) for j in range(n + 1) if i != j], 1.0


def roots_C(m):
    e = np.eye(m)
    out = [s * 2 * e[i] for i in range(m) for s in (1, -1)]
    for i, j in itertools.combinations(range(m), 2):
        for si, sj in itertools.product((1, -1), repeat=2):
            out.append(si * e[i] + sj * e[j])
    return out, 1.0


def roots_F4():
    out, _ = roots_B(4)
    out = list(out)
    for signs in itertools.product((0.5, -0.5), repeat=4):
        out.append(np.array(signs))
    return out, 2.0


def oracle_terms(roots, scale, gamma):
    gamma = np.asarray(gamma, dtype=float)
    gg = gamma @ gamma
    terms = []
    for beta in roots:
        pair = beta @ gamma
        if pair > 1e-12:
            c = Fraction(2 * pair / gg).limit_denominator(100)
            k = Fraction(scale * pair).limit_denominator(100)
            terms.append((c, k))
    return sorted(terms)


def preset_terms(d):
    return sorted((t.c, t.k) for t in d.s_terms)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 6, 7])
def test_so_family_matches_root_oracle(n):
    m = (n + 2) // 2
    roots, scale = roots_B(m) if n % 2 else roots_D(m)
    gamma = np.eye(m)[0]
    assert preset_terms(so_family(n)) == oracle_terms(roots, scale, gamma)
    assert so_family(n).r + 1 == n + 1  # fiber dimension


@pytest.mark.parametrize("n", [2, 3, 4, 6])
def test_sl_family_matches_root_oracle(n):
    roots, scale = roots_A(n)
    gamma = np.zeros(n + 1)
    gamma[0], gamma[n] = 1.0, -1.0
    assert preset_terms(sl_family(n)) == oracle_terms(roots, scale, gamma)
    assert sl_family(n).r + 1 == 2 * n  # fiber dimension


@pytest.mark.parametrize("n", [3, 4, 5])
def test_sp_family_matches_root_oracle(n):
    roots, scale = roots_C(n)
    gamma = np.zeros(n)
    gamma[0] = gamma[1] = 1.0
    assert preset_terms(sp_family(n)) == oracle_terms(roots, scale, gamma)
    assert sp_family(n).r + 1 == 4 * n - 4


def test_f4_matches_root_oracle():
    roots, scale = roots_F4()
    gamma = np.full(4, 0.5)
    assert preset_terms(preset("F4_SO9")) == oracle_terms(roots, scale, gamma)
    assert preset("F4_SO9").r + 1 == 16


def test_p2_conic_oracle():
    # SL_2/SO_2 with gamma = 2 alpha, <alpha, alpha> = 2
    roots = [np.array([1.0, -1.0]), np.array([-1.0, 1.0])]
    gamma = 2 * np.array([1.0, -1.0])
    assert preset_terms(preset("P2_CONIC")) == oracle_terms(roots, 1.0, gamma)


def test_blowup_A2_oracle():
    e = np.eye(3)
    chi = 2 * e[2] - e[0] - e[1]
    gamma = e[0] - e[1]
    unip = [e[2] - e[1], e[2] - e[0]]
    q = sorted((Fraction(int(a @ chi)), Fraction(int(a @ gamma))) for a in unip)
    d = preset("BLOWUP_P2xP2")
    assert sorted((t.a, t.b) for t in d.q_terms) == q
    assert preset_terms(d) == oracle_terms([gamma, -gamma], 1.0, gamma)
    assert d.lambda_ac == 2


def test_lambda_ac_and_r():
    d = preset("P2_CONIC")
    assert d.r == 1 and d.lambda_ac == Fraction(3, 2) and d.N == 1
    assert preset("P1xP1_DIAG").lambda_ac == 2
    assert derived(d) == {"r": 1, "lambda_ac": Fraction(3, 2)}


def test_preset_aliases_and_unknown():
    assert preset("SO_family(3)") == preset("SO_family:3") == preset("so3")
    assert preset("p2_conic") == preset("P2_CONIC")
    with pytest.raises(KeyError):
        preset("E8")
    with pytest.raises(ValueError):
        so_family(0)


def test_all_presets_valid():
    for name in ["P2_CONIC", "P1xP1_DIAG", "BLOWUP_P2xP2", "F4_SO9", "SO5", "SL4", "SP3"]:
        assert validate(preset(name)).ok


@pytest.mark.parametrize(
    "datum, fragment",
    [
        (HorosymmetricDatum("x", ()), "s_terms nonempty"),
        (HorosymmetricDatum("x", ((1, 0),)), "k > 0"),
        (HorosymmetricDatum("x", ((-1, 1),)), "c > 0"),
        (HorosymmetricDatum("x", ((-1, 1), (1, 1))), "lambda_ac > 1"),
        (HorosymmetricDatum("x", ((2, 2),), ((0, -1),)), "a > 0"),
        (HorosymmetricDatum("x", ((2, 2),), ((1, 1),)), "a/b >= lambda_ac"),
    ],
)
def test_validation_reports(datum, fragment):
    rep = validate(datum)
    assert not rep.ok
    assert any(fragment in v for v in rep.violations)
    with pytest.raises(InvalidDatumError):
        require_valid(datum)


def test_boundary_ratio_is_valid():
    # a/b == lambda_ac is allowed: v vanishes only at the endpoint
    d = HorosymmetricDatum("edge", ((2, 2),), ((4, 2),))
    assert validate(d).ok


def test_to_fraction_exact():
    assert to_fraction(0.1) == Fraction(1, 10)
    assert to_fraction("3/2") == Fraction(3, 2)
    assert to_fraction(2) == 2
    with pytest.raises(TypeError):
        to_fraction(True)


def test_scaled():
    d = preset("BLOWUP_P2xP2").scaled(3)
    assert [t.k for t in d.s_terms] == [6]
    assert [(t.a, t.b) for t in d.q_terms] == [(9, 3), (9, -3)]
    assert d.lambda_ac == 2


def test_digest_ignores_label():
    a = preset("P2_CONIC")
    b = HorosymmetricDatum("other", a.s_terms, a.q_terms)
    assert a.digest() == b.digest()
    assert a.digest() != preset("P1xP1_DIAG").digest()


@pytest.mark.parametrize("name", ["P2_CONIC", "BLOWUP_P2xP2", "SL3", "F4_SO9"])
def test_config_round_trip(name):
    d = preset(name)
    assert loads_datum(dumps_datum(d)) == d


def test_config_exact_literals():
    text = """
label = "mixed"
s_terms = [{ c = 1, k = 0.1 }, { c = "1/3", k = 2 }]
q_terms = [{ a = 2.5, b = "-1/7" }]
"""
    d = loads_datum(text)
    assert d.s_terms[0] == SymmetricRootTerm(1, Fraction(1, 10))
    assert d.s_terms[1].c == Fraction(1, 3)
    assert d.q_terms[0] == UnipotentRootTerm(Fraction(5, 2), Fraction(-1, 7))


@pytest.mark.parametrize(
    "text",
    ["s_terms = [{ c = 1 }]", "s_terms = [{ c = 'x', k = 1 }]", "foo = 1", "s_terms = ["],
)
def test_config_errors(text):
    with pytest.raises(InvalidDatumError):
        loads_datum(text)
