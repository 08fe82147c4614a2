"""Stenzel (Ricci-flat) potentials: ``v0(u') u'' = C J`` with ``v0(p) = (prod k) p^r``.

Integrating once gives ``V0(u') = C int_0^x J`` with ``V0(p) = (prod k) p^(r+1)/(r+1)``,
so ``u'`` is explicit and ``u`` follows by Gauss-Legendre quadrature.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from .datum import HorosymmetricDatum, require_valid
from .potentials import SinhProduct, build

__all__ = ["StenzelPotential", "solve_stenzel", "limit_constant", "stenzel_uprime"]


@dataclass
class StenzelPotential:
    datum: HorosymmetricDatum
    C: float
    x: np.ndarray
    u: np.ndarray
    uprime: np.ndarray

    @property
    def r(self) -> int:
        return self.datum.r

    @property
    def V0_coefficient(self) -> float:
        """``V0(p) = coefficient * p^(r+1)``."""
        return _prod_k(self.datum) / (self.r + 1)


def _prod_k(d: HorosymmetricDatum) -> float:
    return float(math.prod((t.k for t in d.s_terms), start=Fraction(1)))


def limit_constant(d: HorosymmetricDatum) -> Fraction:
    """``1 / prod a`` over the unipotent terms (empty product is 1)."""
    require_valid(d)
    return 1 / math.prod((t.a for t in d.q_terms), start=Fraction(1))


def stenzel_uprime(J: SinhProduct, prod_k: float, C: float, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    r = J.r
    out = np.zeros_like(x)
    pos = x > 0
    log_scale = math.log((r + 1) * C / prod_k)
    out[pos] = np.exp((log_scale + J.log_integral_array(x[pos])) / (r + 1))
    return out


def solve_stenzel(
    d: HorosymmetricDatum,
    C: float,
    x: Optional[np.ndarray] = None,
    *,
    x_max: float = 5.0,
    step: float = 1.0 / 64,
    nodes: int = 12,
) -> StenzelPotential:
    """Stenzel potential normalised by ``u(0) = 0``, sampled on ``x`` or a uniform grid."""
    require_valid(d)
    C = float(C)
    if not C > 0:
        raise ValueError("the Stenzel constant must be positive")
    if x is None:
        n = int(round(x_max / step))
        x = np.linspace(0.0, n * step, n + 1)
    x = np.asarray(x, dtype=float)
    if x[0] != 0.0 or np.any(np.diff(x) <= 0):
        raise ValueError("grid must start at 0 and increase strictly")
    J = build(d).J
    pk = _prod_k(d)
    up = stenzel_uprime(J, pk, C, x)
    t, wts = np.polynomial.legendre.leggauss(nodes)
    a, b = x[:-1], x[1:]
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    pts = mid[:, None] + half[:, None] * t[None, :]
    vals = stenzel_uprime(J, pk, C, pts.ravel()).reshape(pts.shape)
    pieces = half * (vals @ wts)
    u = np.concatenate([[0.0], np.cumsum(pieces)])
    return StenzelPotential(d, C, x, u, up)
