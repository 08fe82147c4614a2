"""Backend selection for the shooting kernels.

The compiled extension ``horoke._kernels`` is used when importable; set
``HOROKE_PURE_PYTHON=1`` to force the pure-Python reference.
"""
from __future__ import annotations

import os
from types import ModuleType

from . import _kernels_py

__all__ = ["backend", "get_backend", "make_model", "BACKEND"]


def _load_compiled() -> ModuleType | None:
    if os.environ.get("HOROKE_PURE_PYTHON", "").strip() not in ("", "0"):
        return None
    try:
        from . import _kernels  # type: ignore[attr-defined]
    except ImportError:
        return None
    return _kernels


_compiled = _load_compiled()
backend: ModuleType = _compiled if _compiled is not None else _kernels_py
BACKEND: str = backend.BACKEND


def get_backend(name: str | None = None) -> ModuleType:
    """Return the kernel module for ``name`` (``"cython"``, ``"python"`` or default)."""
    if name is None:
        return backend
    if name == "python":
        return _kernels_py
    if name == "cython":
        if _compiled is None:
            raise RuntimeError("compiled kernels are not available")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


def make_model(pot, cminus1: float, module: ModuleType | None = None):
    """Kernel model for the potentials ``pot`` (a :class:`Potentials`)."""
    mod = module or backend
    v, J = pot.v, pot.J
    return mod.Model(
        list(v.shifted),
        list(v.V_shifted),
        v.r,
        float(v.lam_ac),
        v.V_max,
        float(cminus1),
        [c for c, _ in J.distinct],
        [float(n) for _, n in J.distinct],
    )
