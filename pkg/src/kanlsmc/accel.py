"""Numba/numpy backend selection for the hot numeric kernels.

Modules with compute-heavy inner loops (B-spline basis evaluation, binomial
tree rollback) ship two implementations: a scalar-loop kernel compiled with
``numba.njit`` and a vectorized pure-numpy fallback. The active backend is
chosen once at import time from the ``KANLSMC_BACKEND`` environment variable:

    KANLSMC_BACKEND=numba   force numba (raises if numba is unavailable)
    KANLSMC_BACKEND=numpy   force the pure-numpy path
    (unset)                 numba when importable, numpy otherwise

``bench/benchmark_backends.py`` times both paths against each other.
"""

import os

_requested = os.environ.get("KANLSMC_BACKEND", "").strip().lower()

if _requested not in ("", "numba", "numpy"):
    raise RuntimeError(f"KANLSMC_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

if _requested == "numpy":
    USE_NUMBA = False
else:
    try:
        import numba  # noqa: F401

        USE_NUMBA = True
    except ImportError:
        if _requested == "numba":
            raise
        USE_NUMBA = False

BACKEND = "numba" if USE_NUMBA else "numpy"


def jit_kernel(func):
    """Compile ``func`` with numba when the numba backend is active.

    Kernels decorated with this must also have a vectorized numpy twin;
    the decorated loop form is only ever called when compilation happened.
    """
    if USE_NUMBA:
        return numba.njit(cache=True)(func)
    return func
