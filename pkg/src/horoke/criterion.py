"""Existence threshold for the cone parameter.

A conical solution at ``s`` exists iff

    F(s) = int_0^{lambda_ac - s} (p - (lambda_ac - 1)) v(p) dp > 0.

``F`` is expanded exactly as a polynomial in ``s``; it is strictly decreasing
on ``[0, 1)`` with ``F'(s) = -(1 - s) v(lambda_ac - s)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import comb
from typing import Optional

from .datum import HorosymmetricDatum, require_valid
from .potentials import DensityPolynomial, build_density

__all__ = [
    "ThresholdResult",
    "NoKahlerEinsteinError",
    "criterion_polynomial",
    "threshold",
    "threshold_from_density",
    "criterion_holds",
]

SIGNS = ("corrected", "literal")


class NoKahlerEinsteinError(ValueError):
    """F(0) <= 0: the datum has no Kähler-Einstein metric at s = 0."""


@dataclass(frozen=True)
class ThresholdResult:
    b: float
    b_is_capped: bool
    F: tuple[Fraction, ...]  # ascending coefficients in s
    V_minus: float
    V_plus: float
    b_exact: Optional[Fraction] = None
    sign: str = "corrected"

    def F_value(self, s) -> Fraction:
        return _horner(self.F, Fraction(s))

    def to_json(self) -> dict:
        return {
            "b": self.b,
            "b_exact": None if self.b_exact is None else str(self.b_exact),
            "b_is_capped": self.b_is_capped,
            "F": [str(a) for a in self.F],
            "V_minus": self.V_minus,
            "V_plus": self.V_plus,
            "criterion_sign": self.sign,
        }


def _horner(coeffs, x):
    acc = 0 * x
    for a in reversed(coeffs):
        acc = acc * x + a
    return acc


def criterion_polynomial(
    v: DensityPolynomial, sign: str = "corrected"
) -> tuple[Fraction, ...]:
    """Exact ascending coefficients of ``F`` as a polynomial in ``s``.

    ``sign="literal"`` uses the shift ``(1 - lambda_ac)`` instead of
    ``(lambda_ac - 1)``.
    """
    if sign not in SIGNS:
        raise ValueError(f"sign must be one of {SIGNS}")
    lam = v.lam_ac
    shift = lam - 1 if sign == "corrected" else 1 - lam
    # G(L) = int_0^L (p - shift) v(p) dp, as a polynomial in L
    n = len(v.coeffs)
    G = [Fraction(0)] * (n + 2)
    for i, a in enumerate(v.coeffs):
        G[i + 2] += a / (i + 2)
        G[i + 1] -= shift * a / (i + 1)
    # substitute L = lam - s
    F = [Fraction(0)] * len(G)
    for k, g in enumerate(G):
        if not g:
            continue
        for j in range(k + 1):
            F[j] += g * comb(k, j) * lam ** (k - j) * (-1) ** j
    while len(F) > 1 and F[-1] == 0:
        F.pop()
    return tuple(F)


def _bisect_root(fc: list[float], lo: float, hi: float, tol: float = 1e-12) -> float:
    f_lo = _horner(fc, lo)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        f_mid = _horner(fc, mid)
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def threshold_from_density(v: DensityPolynomial, sign: str = "corrected") -> ThresholdResult:
    F = criterion_polynomial(v, sign)
    if _horner(F, Fraction(0)) <= 0:
        raise NoKahlerEinsteinError("no Kähler-Einstein metric at s=0 (F(0) <= 0)")
    V_plus = float(v.V_exact(v.lam_ac))
    if _horner(F, Fraction(1)) >= 0:
        b, capped, b_exact = 1.0, True, Fraction(1)
    else:
        b = _bisect_root([float(a) for a in F], 0.0, 1.0)
        capped = False
        b_exact = None
        for den in (10**3, 10**6):
            cand = Fraction(b).limit_denominator(den)
            if _horner(F, cand) == 0:
                b_exact = cand
                b = float(cand)
                break
    lo = v.lam_ac - (b_exact if b_exact is not None else Fraction(b))
    V_minus = float(v.V_exact(max(lo, Fraction(0))))
    return ThresholdResult(b, capped, F, V_minus, V_plus, b_exact, sign)


def threshold(d: HorosymmetricDatum, sign: str = "corrected") -> ThresholdResult:
    require_valid(d)
    return threshold_from_density(build_density(d), sign)


def criterion_holds(d: HorosymmetricDatum, s, sign: str = "corrected") -> bool:
    s = Fraction(s) if not isinstance(s, float) else Fraction(repr(s))
    if not (0 <= s < 1):
        raise ValueError(f"s={s} outside [0, 1)")
    require_valid(d)
    F = criterion_polynomial(build_density(d), sign)
    return _horner(F, s) > 0
