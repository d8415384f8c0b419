"""Numba switch.

Hot kernels are written twice: an explicit-loop version compiled with
``numba.njit`` and a vectorised numpy version.  Set
``POINTLCA_DISABLE_NUMBA=1`` to force the numpy path (also used when numba
is not installed).
"""
import os

_FLAG = os.environ.get("POINTLCA_DISABLE_NUMBA", "").strip().lower()

try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is optional
    _numba = None

HAS_NUMBA = _numba is not None
if HAS_NUMBA and "NUMBA_THREADING_LAYER" not in os.environ:
    # Thread-safe layer: kernels may be called from a worker pool.
    _numba.config.THREADING_LAYER = "omp"
USE_NUMBA = HAS_NUMBA and _FLAG not in ("1", "true", "yes", "on")


def njit(*args, **kwargs):
    """``numba.njit`` when numba is importable, otherwise a no-op decorator.

    Loop kernels stay callable as plain Python when numba is absent, which
    is slow but keeps the reference loops testable.
    """
    if HAS_NUMBA:
        return _numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda f: f


prange = _numba.prange if HAS_NUMBA else range


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
