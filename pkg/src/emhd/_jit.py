"""Numba switch.

Hot kernels are written once in numpy-compatible Python and compiled with
``numba.njit`` unless ``EMHD_DISABLE_NUMBA`` is set to a truthy value (or
numba is missing), in which case the plain functions run as-is.
"""

import os

_FLAG = os.environ.get("EMHD_DISABLE_NUMBA", "").strip().lower()

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

NUMBA_ENABLED = HAVE_NUMBA and _FLAG not in {"1", "true", "yes", "on"}


def maybe_njit(func):
    """Return the compiled kernel when numba is enabled, else ``func``."""
    if NUMBA_ENABLED:
        return numba.njit(cache=True)(func)
    return func


def njit_always(func):
    """Compile regardless of the env flag; used by benchmarks and tests."""
    if HAVE_NUMBA:
        return numba.njit(cache=True)(func)
    return func
