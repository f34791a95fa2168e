"""Kernel backend selection.

Hot per-interval loops are compiled with numba when it is available.
Setting ``MINPULSE_BACKEND=numpy`` forces the pure-numpy/Python path
(same functions, undecorated), which is also used automatically when
numba cannot be imported.  ``benchmarks/compare_backends.py`` times the
two paths against each other.
"""

import os

__all__ = ["HAVE_NUMBA", "USE_NUMBA", "BACKEND", "maybe_njit"]

try:
    from numba import njit as _njit
    HAVE_NUMBA = True
except ImportError:
    _njit = None
    HAVE_NUMBA = False

_requested = os.environ.get("MINPULSE_BACKEND", "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    raise ValueError(
        f"MINPULSE_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

USE_NUMBA = HAVE_NUMBA and _requested == "numba"
BACKEND = "numba" if USE_NUMBA else "numpy"


def maybe_njit(func):
    """Compile with numba when the numba backend is active, else return as-is."""
    if USE_NUMBA:
        return _njit(cache=True, nogil=True)(func)
    return func
