"""Numba switch.

Set ``TRAPSMOOTH_DISABLE_NUMBA=1`` before import to run every hot kernel
through its numpy/LAPACK counterpart instead of the JIT-compiled loop.
"""
from __future__ import annotations

import os

_flag = os.environ.get("TRAPSMOOTH_DISABLE_NUMBA", "").strip().lower()

try:
    from numba import njit as _njit
    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _njit = None
    NUMBA_AVAILABLE = False

USE_NUMBA = NUMBA_AVAILABLE and _flag not in ("1", "true", "yes", "on")


def njit(*args, **kwargs):
    """``numba.njit`` when numba is importable, identity otherwise.

    The decorated function is always compiled when numba exists; whether the
    compiled or the numpy path gets *called* is decided by ``USE_NUMBA``.
    """
    if _njit is not None:
        return _njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda f: f


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
