"""Numba availability switch.

Set ``SWITCHDIAG_DISABLE_NUMBA=1`` before import to route every hot kernel
through the vectorized numpy implementations instead of the compiled loops.
"""

import os

_FLAG = "SWITCHDIAG_DISABLE_NUMBA"

try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and os.environ.get(_FLAG, "").strip().lower() not in ("1", "true", "yes", "on")


def njit(*args, **kwargs):
    """``numba.njit(cache=True)`` when numba is importable, identity otherwise.

    The loop kernels are always decorated when numba exists, even if the env
    flag selects the numpy path, so the two paths can be compared in tests.
    """
    if HAS_NUMBA:
        kwargs.setdefault("cache", True)
        return numba.njit(*args, **kwargs)

    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]

    def wrapper(func):
        return func

    return wrapper


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
