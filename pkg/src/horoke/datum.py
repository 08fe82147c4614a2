"""Scalar description of a rank-one horosymmetric space.

Only the pairings that enter the reduced one-variable equations are kept:

* one ``SymmetricRootTerm(c, k)`` per root of the symmetric part, with
  ``c = 2 beta(gamma*)`` and ``k = kappa(beta, gamma)``;
* one ``UnipotentRootTerm(a, b)`` per root of the unipotent radical, with
  ``a = kappa(alpha, chi_H)`` and ``b = kappa(alpha, gamma)``.

All scalars are stored as :class:`fractions.Fraction` so that the density
polynomial and the threshold polynomial can be expanded exactly.
"""
from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Union

try:  # Python >= 3.11
    import tomllib as _toml
except ModuleNotFoundError:  # pragma: no cover - exercised on 3.10
    import tomli as _toml

__all__ = [
    "SymmetricRootTerm",
    "UnipotentRootTerm",
    "HorosymmetricDatum",
    "ValidationReport",
    "InvalidDatumError",
    "validate",
    "derived",
    "preset",
    "PRESET_NAMES",
    "load_datum",
    "dumps_datum",
    "to_fraction",
]

Scalar = Union[int, float, str, Fraction]


class InvalidDatumError(ValueError):
    """Raised when an operation needs a valid datum and gets an invalid one."""


def to_fraction(value: Scalar) -> Fraction:
    """Convert a literal to an exact rational.

    Floats are read through their shortest decimal representation, so ``0.1``
    becomes ``1/10`` rather than the binary approximation.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not scalars")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(repr(value))
    if isinstance(value, str):
        return Fraction(value.strip())
    # decimal.Decimal and friends
    return Fraction(str(value))


@dataclass(frozen=True)
class SymmetricRootTerm:
    c: Fraction
    k: Fraction

    def __post_init__(self):
        object.__setattr__(self, "c", to_fraction(self.c))
        object.__setattr__(self, "k", to_fraction(self.k))


@dataclass(frozen=True)
class UnipotentRootTerm:
    a: Fraction
    b: Fraction

    def __post_init__(self):
        object.__setattr__(self, "a", to_fraction(self.a))
        object.__setattr__(self, "b", to_fraction(self.b))


@dataclass(frozen=True)
class HorosymmetricDatum:
    label: str
    s_terms: tuple[SymmetricRootTerm, ...]
    q_terms: tuple[UnipotentRootTerm, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "s_terms", tuple(_as_s(t) for t in self.s_terms))
        object.__setattr__(self, "q_terms", tuple(_as_q(t) for t in self.q_terms))

    @property
    def r(self) -> int:
        """Order of vanishing of the density at 0 (number of symmetric roots)."""
        return len(self.s_terms)

    @property
    def lambda_ac(self) -> Fraction:
        return 1 + sum((t.c for t in self.s_terms), Fraction(0)) / 2

    @property
    def N(self) -> int:
        """Total degree of the density polynomial."""
        return len(self.s_terms) + len(self.q_terms)

    def scaled(self, t: Scalar) -> "HorosymmetricDatum":
        """Rescale the invariant form: every ``k``, ``a`` and ``b`` times ``t``."""
        t = to_fraction(t)
        return HorosymmetricDatum(
            label=f"{self.label}*{t}",
            s_terms=tuple(SymmetricRootTerm(x.c, x.k * t) for x in self.s_terms),
            q_terms=tuple(UnipotentRootTerm(x.a * t, x.b * t) for x in self.q_terms),
        )

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "s_terms": [{"c": str(t.c), "k": str(t.k)} for t in self.s_terms],
            "q_terms": [{"a": str(t.a), "b": str(t.b)} for t in self.q_terms],
        }

    def digest(self) -> str:
        """Stable hash of the scalar content (label excluded)."""
        payload = self.to_dict()
        payload.pop("label")
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _as_s(t) -> SymmetricRootTerm:
    if isinstance(t, SymmetricRootTerm):
        return t
    if isinstance(t, dict):
        return SymmetricRootTerm(t["c"], t["k"])
    c, k = t
    return SymmetricRootTerm(c, k)


def _as_q(t) -> UnipotentRootTerm:
    if isinstance(t, UnipotentRootTerm):
        return t
    if isinstance(t, dict):
        return UnipotentRootTerm(t["a"], t["b"])
    a, b = t
    return UnipotentRootTerm(a, b)


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[str, ...] = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def validate(d: HorosymmetricDatum) -> ValidationReport:
    """Check the structural constraints; violations are returned, not raised."""
    out = []
    if not d.s_terms:
        out.append("s_terms nonempty (r >= 1; the horospherical case is excluded)")
    for i, t in enumerate(d.s_terms):
        if t.c <= 0:
            out.append(f"s_terms[{i}]: c > 0")
        if t.k <= 0:
            out.append(f"s_terms[{i}]: k > 0")
    lam = d.lambda_ac
    if d.s_terms and lam <= 1:
        out.append("lambda_ac > 1")
    for i, t in enumerate(d.q_terms):
        if t.a <= 0:
            out.append(f"q_terms[{i}]: a > 0")
        if t.b > 0 and t.a / t.b < lam:
            out.append(f"q_terms[{i}]: a/b >= lambda_ac ({t.a / t.b} < {lam})")
    return ValidationReport(tuple(out))


def require_valid(d: HorosymmetricDatum) -> None:
    report = validate(d)
    if not report.ok:
        raise InvalidDatumError(f"invalid datum {d.label!r}: " + "; ".join(report.violations))


def derived(d: HorosymmetricDatum) -> dict:
    require_valid(d)
    return {"r": d.r, "lambda_ac": d.lambda_ac}


# -- presets ---------------------------------------------------------------
#
# Form normalised so that short roots of the (simple factor of the) group
# have squared length 2.  gamma is the generator of the spherical lattice:
# the restricted root eps for the SO family, 2*eps for the BC_1 families
# (SL, Sp, F4), and 2*alpha for the space of nondegenerate conics.

def _symmetric(label: str, terms: Iterable[tuple[Scalar, Scalar, int]]) -> HorosymmetricDatum:
    s_terms = []
    for c, k, mult in terms:
        s_terms.extend([SymmetricRootTerm(c, k)] * mult)
    return HorosymmetricDatum(label, tuple(s_terms), ())


def so_family(n: int) -> HorosymmetricDatum:
    # SO_{n+2}/SO_{n+1}: n roots restricting to eps.  gamma = eps = e_1, whose
    # squared length is 2 in type B (n odd, e_1 short) and 1 in type D.
    if n < 1:
        raise ValueError("SO_family needs n >= 1 (n = 0 is horospherical)")
    k = 2 if n % 2 else 1
    return _symmetric(f"SO_family({n})", [(2, k, n)])


def sl_family(n: int) -> HorosymmetricDatum:
    # SL_{n+1}/GL_n: 2(n-1) roots restricting to eps, one to 2 eps.
    if n < 2:
        raise ValueError("SL_family needs n >= 2")
    return _symmetric(f"SL_family({n})", [(1, 1, 2 * (n - 1)), (2, 2, 1)])


def sp_family(n: int) -> HorosymmetricDatum:
    # Sp_{2n}/Sp_2 x Sp_{2n-2}: 4(n-2) roots on eps, three on 2 eps.
    if n < 3:
        raise ValueError("SP_family needs n >= 3")
    return _symmetric(f"SP_family({n})", [(1, 1, 4 * (n - 2)), (2, 2, 3)])


def _f4_so9() -> HorosymmetricDatum:
    return _symmetric("F4_SO9", [(1, 1, 8), (2, 2, 7)])


def _p2_conic() -> HorosymmetricDatum:
    return _symmetric("P2_CONIC", [(1, 4, 1)])


def _p1xp1_diag() -> HorosymmetricDatum:
    return _symmetric("P1xP1_DIAG", [(2, 2, 1)])


def _blowup_p2xp2() -> HorosymmetricDatum:
    # SL_3 with L = S(GL_2 x GL_1): gamma = alpha_1, chi_H = 2e_3 - e_1 - e_2,
    # unipotent roots -alpha_2 and -(alpha_1 + alpha_2).
    return HorosymmetricDatum(
        "BLOWUP_P2xP2",
        (SymmetricRootTerm(2, 2),),
        (UnipotentRootTerm(3, 1), UnipotentRootTerm(3, -1)),
    )


PRESET_NAMES = (
    "P2_CONIC",
    "P1xP1_DIAG",
    "BLOWUP_P2xP2",
    "SO_family(n)",
    "SL_family(n)",
    "SP_family(n)",
    "F4_SO9",
)

_FIXED = {
    "P2_CONIC": _p2_conic,
    "P1XP1_DIAG": _p1xp1_diag,
    "BLOWUP_P2XP2": _blowup_p2xp2,
    "F4_SO9": _f4_so9,
}
_FAMILIES = {"SO_FAMILY": so_family, "SL_FAMILY": sl_family, "SP_FAMILY": sp_family}
_FAMILY_RE = re.compile(r"^\s*(SO|SL|SP)(?:_family)?\s*[(:]?\s*(\d+)\s*\)?\s*$", re.IGNORECASE)


def preset(name: str) -> HorosymmetricDatum:
    """Return a preset datum.

    Family presets accept ``SO_family(3)``, ``SO_family:3`` or ``SO3``.
    """
    key = name.strip().upper()
    if key in _FIXED:
        return _FIXED[key]()
    m = _FAMILY_RE.match(name)
    if m:
        fam = _FAMILIES[m.group(1).upper() + "_FAMILY"]
        return fam(int(m.group(2)))
    raise KeyError(f"unknown preset {name!r}; known: {', '.join(PRESET_NAMES)}")


# -- config files ----------------------------------------------------------

def _parse_scalar(value) -> Fraction:
    try:
        return to_fraction(value)
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise InvalidDatumError(f"not an exact scalar: {value!r}") from exc


def datum_from_mapping(data: dict, default_label: str = "datum") -> HorosymmetricDatum:
    unknown = set(data) - {"label", "s_terms", "q_terms"}
    if unknown:
        raise InvalidDatumError(f"unknown keys: {sorted(unknown)}")
    try:
        s_terms = tuple(
            SymmetricRootTerm(_parse_scalar(t["c"]), _parse_scalar(t["k"]))
            for t in data.get("s_terms", [])
        )
        q_terms = tuple(
            UnipotentRootTerm(_parse_scalar(t["a"]), _parse_scalar(t["b"]))
            for t in data.get("q_terms", [])
        )
    except (KeyError, TypeError) as exc:
        raise InvalidDatumError(f"malformed term table: {exc}") from exc
    return HorosymmetricDatum(str(data.get("label", default_label)), s_terms, q_terms)


def loads_datum(text: str, default_label: str = "datum") -> HorosymmetricDatum:
    """Parse the TOML datum format.

    Scalars may be integers, decimals, or quoted rationals such as ``"3/2"``;
    decimals are kept exact.
    """
    from decimal import Decimal

    try:
        data = _toml.loads(text, parse_float=Decimal)
    except _toml.TOMLDecodeError as exc:
        raise InvalidDatumError(f"cannot parse datum: {exc}") from exc
    return datum_from_mapping(data, default_label)


def load_datum(path: Union[str, Path]) -> HorosymmetricDatum:
    path = Path(path)
    return loads_datum(path.read_text(encoding="utf-8"), default_label=path.stem)


def _lit(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else f'"{x}"'


def dumps_datum(d: HorosymmetricDatum) -> str:
    lines = [f"label = {json.dumps(d.label)}", "s_terms = ["]
    lines += [f"  {{ c = {_lit(t.c)}, k = {_lit(t.k)} }}," for t in d.s_terms]
    lines.append("]")
    if d.q_terms:
        lines.append("q_terms = [")
        lines += [f"  {{ a = {_lit(t.a)}, b = {_lit(t.b)} }}," for t in d.q_terms]
        lines.append("]")
    else:
        lines.append("q_terms = []")
    return "\n".join(lines) + "\n"
