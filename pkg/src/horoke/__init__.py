"""Numerical laboratory for conical Kähler-Einstein potentials on rank-one
horosymmetric spaces."""

__version__ = "0.1.0"
