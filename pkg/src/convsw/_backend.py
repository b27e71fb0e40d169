"""Kernel backend selection.

Hot loops are written once as plain Python over numpy arrays and compiled
with numba when it is available.  Setting ``CSW_DISABLE_NUMBA=1`` forces
the vectorized numpy implementations instead; both produce bit-identical
forward results (same summation order).
"""
import os

try:
    import numba
    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAS_NUMBA = False

_FLAG = os.environ.get("CSW_DISABLE_NUMBA", "").strip().lower()
_active = "numpy" if (_FLAG not in ("", "0", "false", "no") or not HAS_NUMBA) else "numba"


def njit(fn):
    """``numba.njit`` with the project defaults, or the function unchanged."""
    if not HAS_NUMBA:
        return fn
    return numba.njit(cache=True, nogil=True)(fn)


def get_backend():
    return _active


def set_backend(name):
    """Switch kernels at runtime; returns the previous backend name."""
    global _active
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAS_NUMBA:
        raise RuntimeError("numba is not installed")
    prev, _active = _active, name
    return prev


def available_backends():
    return ("numba", "numpy") if HAS_NUMBA else ("numpy",)
