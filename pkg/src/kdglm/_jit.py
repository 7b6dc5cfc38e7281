"""Optional numba acceleration.

Hot kernels are decorated with :func:`njit`. When numba is missing, or the
environment variable ``KDGLM_NUMBA`` is set to ``0``, the decorator is the
identity and the same functions run as plain Python/numpy code. The flag is
read once, at import time.
"""

import os

_flag = os.environ.get("KDGLM_NUMBA", "1").strip().lower()
_requested = _flag not in ("0", "false", "off", "no")

try:
    if not _requested:
        raise ImportError
    import numba as _numba
except ImportError:
    _numba = None

USE_NUMBA = _numba is not None


def njit(fn):
    if USE_NUMBA:
        return _numba.njit(cache=True)(fn)
    return fn


def backend():
    return "numba" if USE_NUMBA else "numpy"
