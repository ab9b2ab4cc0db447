"""Backend switch for the compiled kernels.

Every hot kernel in :mod:`err_rewiring.kernels` exists twice: a numba
``@njit`` version and a pure-numpy version. ``ERR_NUMBA=0`` in the
environment (read once, at import) routes the public dispatchers to the
numpy versions. Both versions stay importable either way so tests and the
benchmark can compare them.
"""
from __future__ import annotations

import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and os.environ.get("ERR_NUMBA", "1").strip().lower() not in {
    "0",
    "false",
    "no",
    "off",
}


def njit(fn=None, **options):
    """``numba.njit(cache=True)`` when numba is installed, identity otherwise."""
    options.setdefault("cache", True)

    def wrap(f):
        if not HAVE_NUMBA:
            return f
        return numba.njit(**options)(f)

    if fn is not None:
        return wrap(fn)
    return wrap


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
