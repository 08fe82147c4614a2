"""Density polynomial ``v``, its primitive ``V`` and the sinh product ``J``.

``v(p) = (prod k) p^r prod (a - b p)`` and ``J(x) = prod sinh(c x)`` are
expanded exactly (rational coefficients, exponential sums) so that ``V`` and
``int_0^x J`` have closed forms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import _kernels_py as _ref
from .datum import HorosymmetricDatum, require_valid

__all__ = [
    "DensityPolynomial",
    "SinhProduct",
    "Potentials",
    "CBounds",
    "DomainError",
    "build",
    "build_density",
    "eval_v",
    "eval_V",
    "invert_V",
    "eval_J",
    "eval_j",
    "eval_logJ",
    "eval_intJ",
    "eval_log_intJ",
    "eval_dj",
    "c_bounds",
]


class DomainError(ValueError):
    pass


def _polymul(p: Sequence[Fraction], q: Sequence[Fraction]) -> list[Fraction]:
    out = [Fraction(0)] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        if a:
            for j, b in enumerate(q):
                out[i + j] += a * b
    return out


def _horner_exact(coeffs: Sequence[Fraction], x: Fraction) -> Fraction:
    acc = Fraction(0)
    for a in reversed(coeffs):
        acc = acc * x + a
    return acc


@dataclass(frozen=True)
class DensityPolynomial:
    """``v`` with exact ascending coefficients ``coeffs`` (``coeffs[i]`` of ``p^i``)."""

    coeffs: tuple[Fraction, ...]
    r: int
    lam_ac: Fraction
    _shift: tuple[float, ...] = field(init=False, repr=False, compare=False)
    _Vshift: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if any(self.coeffs[: self.r]) or not self.coeffs[self.r]:
            raise ValueError("v must vanish to order exactly r at 0")
        object.__setattr__(self, "_shift", tuple(float(a) for a in self.coeffs[self.r:]))
        object.__setattr__(
            self, "_Vshift", tuple(float(a) for a in self.primitive_coeffs[self.r + 1:])
        )

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def primitive_coeffs(self) -> tuple[Fraction, ...]:
        """Coefficients of ``V(p) = int_0^p v``."""
        return (Fraction(0),) + tuple(a / (i + 1) for i, a in enumerate(self.coeffs))

    @property
    def shifted(self) -> tuple[float, ...]:
        """Float coefficients of ``v(p) / p^r``."""
        return self._shift

    @property
    def V_shifted(self) -> tuple[float, ...]:
        """Float coefficients of ``V(p) / p^(r+1)``."""
        return self._Vshift

    def exact(self, p) -> Fraction:
        return _horner_exact(self.coeffs, Fraction(p))

    def V_exact(self, p) -> Fraction:
        return _horner_exact(self.primitive_coeffs, Fraction(p))

    def __call__(self, p: float) -> float:
        return p ** self.r * _ref.horner(self._shift, p)

    @property
    def V_max(self) -> float:
        return float(self.V_exact(self.lam_ac))


@dataclass(frozen=True)
class SinhProduct:
    """``J(x) = prod_i sinh(c_i x) = sum_e w_e exp(lam_e x)``.

    ``expansion`` is a tuple of exact ``(lam_e, w_e)`` pairs with equal
    exponents merged.  Small ``x`` goes through a positive Taylor series,
    large ``x`` through the expansion with ``exp(lam_max x)`` factored out.
    """

    rates: tuple[Fraction, ...]
    expansion: tuple[tuple[Fraction, Fraction], ...] = field(init=False)
    distinct: tuple[tuple[float, int], ...] = field(init=False, repr=False)
    lam_max: Fraction = field(init=False)
    x_switch: float = field(init=False, repr=False)
    _taylor: np.ndarray = field(init=False, repr=False, compare=False)
    _int_taylor: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        terms = {Fraction(0): Fraction(1)}
        for c in self.rates:
            nxt: dict[Fraction, Fraction] = {}
            for lam, wt in terms.items():
                for sgn in (1, -1):
                    key = lam + sgn * c
                    nxt[key] = nxt.get(key, Fraction(0)) + sgn * wt / 2
            terms = {k: v for k, v in nxt.items() if v}
        object.__setattr__(self, "expansion", tuple(sorted(terms.items(), reverse=True)))
        counts: dict[Fraction, int] = {}
        for c in self.rates:
            counts[c] = counts.get(c, 0) + 1
        object.__setattr__(
            self, "distinct", tuple((float(c), n) for c, n in sorted(counts.items()))
        )
        lam_max = sum(self.rates, Fraction(0))
        object.__setattr__(self, "lam_max", lam_max)
        c_min = float(min(self.rates))
        x_switch = 3.0 / c_min
        object.__setattr__(self, "x_switch", x_switch)
        n_terms = int(math.e * float(lam_max) * x_switch) + 60
        series = np.zeros(n_terms + 1)
        series[0] = 1.0
        for cv, mult in self.distinct:
            s = np.zeros(n_terms + 1)
            term = cv
            for k in range(1, n_terms + 1, 2):
                s[k] = term
                term = term * cv * cv / ((k + 1) * (k + 2))
            for _ in range(mult):
                series = np.convolve(series, s)[: n_terms + 1]
        object.__setattr__(self, "_taylor", series)
        object.__setattr__(self, "_int_taylor", series / np.arange(1, n_terms + 2))

    @property
    def r(self) -> int:
        return len(self.rates)

    def _log_scaled_exp_sum(self, x: float, integrate: bool) -> float:
        lm = float(self.lam_max)
        acc = 0.0
        for lam, wt in self.expansion:
            lf = float(lam)
            if integrate:
                if lam == 0:
                    acc += float(wt) * x * math.exp(-lm * x)
                else:
                    acc += float(wt) / lf * (math.exp((lf - lm) * x) - math.exp(-lm * x))
            else:
                acc += float(wt) * math.exp((lf - lm) * x)
        return lm * x + math.log(acc)

    def log_value(self, x: float) -> float:
        if x < self.x_switch:
            return sum(n * math.log(math.sinh(c * x)) for c, n in self.distinct)
        return self._log_scaled_exp_sum(x, integrate=False)

    def log_integral(self, x: float) -> float:
        if x < self.x_switch:
            # int_0^x J = x^(r+1) * sum_n a_{n+r} x^n / (n+r+1), all terms positive
            coeffs = self._int_taylor[self.r:]
            return (self.r + 1) * math.log(x) + math.log(np.polynomial.polynomial.polyval(x, coeffs))
        return self._log_scaled_exp_sum(x, integrate=True)

    def log_integral_array(self, x: np.ndarray) -> np.ndarray:
        """Vectorised :meth:`log_integral` for ``x > 0``."""
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        small = x < self.x_switch
        xs = x[small]
        out[small] = (self.r + 1) * np.log(xs) + np.log(
            np.polynomial.polynomial.polyval(xs, self._int_taylor[self.r:])
        )
        xl = x[~small]
        if xl.size:
            lm = float(self.lam_max)
            acc = np.zeros_like(xl)
            for lam, wt in self.expansion:
                lf = float(lam)
                if lam == 0:
                    acc += float(wt) * xl * np.exp(-lm * xl)
                else:
                    acc += float(wt) / lf * (np.exp((lf - lm) * xl) - np.exp(-lm * xl))
            out[~small] = lm * xl + np.log(acc)
        return out


@dataclass(frozen=True)
class Potentials:
    v: DensityPolynomial
    J: SinhProduct


def build_density(d: HorosymmetricDatum) -> DensityPolynomial:
    require_valid(d)
    coeffs = [Fraction(1)]
    for t in d.s_terms:
        coeffs = _polymul(coeffs, [Fraction(0), t.k])
    for t in d.q_terms:
        coeffs = _polymul(coeffs, [t.a, -t.b])
    return DensityPolynomial(tuple(coeffs), d.r, d.lambda_ac)


def build(d: HorosymmetricDatum) -> Potentials:
    v = build_density(d)
    return Potentials(v, SinhProduct(tuple(t.c for t in d.s_terms)))


def _check_p(v: DensityPolynomial, p: float) -> None:
    if not (0.0 <= p <= float(v.lam_ac)) or math.isnan(p):
        raise DomainError(f"p={p} outside [0, {v.lam_ac}]")


def eval_v(v: DensityPolynomial, p: float) -> float:
    _check_p(v, p)
    return v(p)


def eval_V(v: DensityPolynomial, p: float) -> float:
    _check_p(v, p)
    return p ** (v.r + 1) * _ref.horner(v.V_shifted, p)


def _model(v: DensityPolynomial, cminus1: float) -> _ref.Model:
    return _ref.Model(v.shifted, v.V_shifted, v.r, v.lam_ac, v.V_max, cminus1, [1.0], [1.0])


def invert_V(v: DensityPolynomial, q: float, cminus1: float | None = None) -> float:
    """Unique ``p`` with ``V(p) = q``; power-law extension above ``V(lambda_ac)``."""
    if q < 0 or math.isnan(q):
        raise DomainError(f"q={q} < 0")
    if cminus1 is None:
        cminus1 = c_bounds(v).C_minus1 if q > v.V_max else 1.0
    return _ref.vinv(_model(v, cminus1), float(q), -1.0)


def eval_logJ(J: SinhProduct, x: float) -> float:
    if not x > 0:
        raise DomainError("ln J needs x > 0")
    return J.log_value(float(x))


def eval_J(J: SinhProduct, x: float) -> float:
    if x < 0 or math.isnan(x):
        raise DomainError("J is evaluated on x >= 0")
    if x == 0:
        return 0.0
    lj = J.log_value(float(x))
    return math.exp(lj) if lj < 709.0 else math.inf


def eval_j(J: SinhProduct, x: float) -> float:
    if not x > 0:
        raise DomainError("j needs x > 0")
    return -J.log_value(float(x))


def eval_dj(J: SinhProduct, x: float) -> float:
    """``j'(x) = -sum c coth(c x)``."""
    if not x > 0:
        raise DomainError("j' needs x > 0")
    return -sum(n * c / math.tanh(c * x) for c, n in J.distinct)


def eval_log_intJ(J: SinhProduct, x: float) -> float:
    if not x > 0:
        raise DomainError("ln int J needs x > 0")
    return J.log_integral(float(x))


def eval_intJ(J: SinhProduct, x: float) -> float:
    if x < 0 or math.isnan(x):
        raise DomainError("int J is evaluated on x >= 0")
    if x == 0:
        return 0.0
    li = J.log_integral(float(x))
    return math.exp(li) if li < 709.0 else math.inf


@dataclass(frozen=True)
class CBounds:
    C_v: float
    C_minus1: float
    q0: float


def c_bounds(v: DensityPolynomial, samples: int = 4096) -> CBounds:
    """Constants of the two-sided power bounds on ``v`` and ``V^{-1}``.

    ``C_v`` bounds ``v(p)/p^r`` above and below on ``[0, lambda_ac - 1]``.
    ``C_-1`` follows the monotonicity argument: the power law holds with
    ``(C_v (r+1))^(1/(r+1))`` up to ``q0 = V(lambda_ac - 1)``, and beyond
    ``q0`` the range ``[lambda_ac - 1, lambda_ac]`` of ``V^{-1}`` is absorbed.
    The result is also maxed with the sampled ratio so it certifies the grid.
    """
    r = v.r
    lam = float(v.lam_ac)
    p = np.linspace(0.0, lam - 1.0, samples + 1)
    ratio = np.polynomial.polynomial.polyval(p, v.shifted)
    C_v = float(max(ratio.max(), (1.0 / ratio).max()))
    e = 1.0 / (r + 1)
    q0 = float(v.V_exact(v.lam_ac - 1))
    Vmax = v.V_max
    candidates = [
        (C_v * (r + 1)) ** e,
        (C_v / (r + 1)) ** e,
        lam / q0 ** e,
        Vmax ** e / (lam - 1.0),
    ]
    pp = np.linspace(0.0, lam, samples + 1)[1:]
    qq = pp ** (r + 1) * np.polynomial.polynomial.polyval(pp, v.V_shifted)
    sampled = pp / qq ** e
    candidates += [float(sampled.max()), float((1.0 / sampled).max())]
    return CBounds(C_v=C_v, C_minus1=float(max(candidates)), q0=q0)


def log_J_array(J: SinhProduct, x: np.ndarray) -> np.ndarray:
    """Vectorised ``ln J`` for ``x > 0`` (sum of stable log-sinh terms)."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for c, n in J.distinct:
        y = c * x
        out += n * (y + np.log(-np.expm1(-2.0 * y)) - math.log(2.0))
    return out


def dj_array(J: SinhProduct, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for c, n in J.distinct:
        out -= n * c / np.tanh(c * x)
    return out


def d2j_array(J: SinhProduct, x: np.ndarray) -> np.ndarray:
    """``j''(x) = sum c^2 / sinh^2(c x)``."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for c, n in J.distinct:
        y = c * x
        out += n * (2.0 * c * np.exp(-y) / -np.expm1(-2.0 * y)) ** 2
    return out


def v_array(v: DensityPolynomial, p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    return p ** v.r * np.polynomial.polynomial.polyval(p, v.shifted)
