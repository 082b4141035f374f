"""Kernel backend selection.

Hot non-BLAS kernels ship in two variants: a numba ``@njit`` build and a
pure-numpy fallback. The active variant is chosen once at import time from
the ``EVOGENE_BACKEND`` environment variable:

    EVOGENE_BACKEND=numba   force numba (error if numba is unavailable)
    EVOGENE_BACKEND=numpy   force the pure-numpy path
    unset                   numba when importable, numpy otherwise

Within one backend all kernels are bit-deterministic; the two backends may
differ in the last float bits where accumulation order differs, so pick one
backend and stick with it when byte-identical artifacts matter.
"""

import os

_requested = os.environ.get("EVOGENE_BACKEND", "").strip().lower()

if _requested not in ("", "numba", "numpy"):
    raise RuntimeError(
        f"EVOGENE_BACKEND must be 'numba' or 'numpy', got {_requested!r}"
    )

if _requested == "numpy":
    HAS_NUMBA = False
else:
    try:
        import numba  # noqa: F401

        HAS_NUMBA = True
    except ImportError:
        if _requested == "numba":
            raise
        HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and _requested != "numpy"


def active_backend() -> str:
    return "numba" if USE_NUMBA else "numpy"


def njit(func):
    """Wrap in numba's lazy ``@njit`` when numba is importable, else no-op.

    Compilation only happens on first call, so wrapping is free for code
    paths the selected backend never dispatches to. The benchmark calls both
    variants directly to compare them.
    """
    if HAS_NUMBA:
        from numba import njit as _njit

        return _njit(cache=True)(func)
    return func
