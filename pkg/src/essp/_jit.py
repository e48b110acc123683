"""Optional numba acceleration.

Set ``ESSP_DISABLE_JIT=1`` in the environment before importing :mod:`essp`
to force the pure-numpy code paths.
"""

import os

JIT_DISABLED = os.environ.get("ESSP_DISABLE_JIT", "").strip().lower() in ("1", "true", "yes")

try:
    from numba import njit as _numba_njit

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    NUMBA_AVAILABLE = False
    _numba_njit = None

USE_JIT = NUMBA_AVAILABLE and not JIT_DISABLED


def njit(*args, **kwargs):
    """``numba.njit`` when numba is importable, identity decorator otherwise.

    Kernels are always compiled when numba exists so the benchmark can compare
    both paths in one process; ``USE_JIT`` only decides which one callers get.
    """
    if not NUMBA_AVAILABLE:
        if len(args) == 1 and callable(args[0]):
            return args[0]
        return lambda f: f
    return _numba_njit(*args, **kwargs)
