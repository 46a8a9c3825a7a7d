"""Optional numba acceleration.

Set ``STEKLOV_LAB_DISABLE_JIT=1`` to run every kernel as plain Python/numpy.
The flag is read once at import time.
"""
import os

DISABLED = os.environ.get("STEKLOV_LAB_DISABLE_JIT", "").strip().lower() in ("1", "true", "yes")

try:
    import numba as _numba
    HAS_NUMBA = True
except ImportError:  # pragma: no cover
    _numba = None
    HAS_NUMBA = False

USE_JIT = HAS_NUMBA and not DISABLED


def njit(*args, **kwargs):
    """``numba.njit`` when enabled, identity decorator otherwise."""
    if USE_JIT:
        kwargs.setdefault("cache", True)
        kwargs.setdefault("nogil", True)
        return _numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]

    def deco(fn):
        return fn
    return deco
