"""Backend switch for the compiled kernels.

Every hot loop in :mod:`garmentflow.kernels` exists twice: a numba
``@njit`` loop and a vectorised numpy version.  The active path is picked
once, at import time, from the ``GARMENTFLOW_BACKEND`` environment variable
(``numba`` or ``numpy``).  Without the variable numba is used when it
imports, numpy otherwise.
"""

from __future__ import annotations

import os

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

_requested = os.environ.get("GARMENTFLOW_BACKEND", "").strip().lower()
if _requested not in ("", "numba", "numpy"):
    raise ValueError(
        f"GARMENTFLOW_BACKEND must be 'numba' or 'numpy', got {_requested!r}"
    )

USE_NUMBA = HAVE_NUMBA and _requested != "numpy"
BACKEND = "numba" if USE_NUMBA else "numpy"


def njit(func):
    """``numba.njit(cache=True)`` when numba is importable, identity otherwise.

    The numba variants are compiled even when the numpy backend is active so
    that the benchmark and the cross-backend tests can call both.
    """
    if not HAVE_NUMBA:
        return func
    return numba.njit(cache=True)(func)


def pick(numba_impl, numpy_impl):
    return numba_impl if USE_NUMBA else numpy_impl
