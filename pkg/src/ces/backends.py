"""Backend selection for the hot integrator kernels.

The Lorenz time-averaging loops dominate runtime for the chaotic-system
experiments. They are compiled with numba when available; a pure-numpy
fallback implements the same step sequence. Selection is controlled by the
environment variable CES_BACKEND:

    CES_BACKEND=numba   require numba (error if not importable)
    CES_BACKEND=numpy   force the pure-numpy fallback
    unset / auto        numba if importable, else numpy
"""

import os

_backend = None


def _resolve() -> str:
    requested = os.environ.get("CES_BACKEND", "auto").lower()
    if requested not in ("auto", "numba", "numpy"):
        raise ValueError(f"CES_BACKEND must be 'numba' or 'numpy', got {requested!r}")
    if requested == "numpy":
        return "numpy"
    try:
        import numba  # noqa: F401
        return "numba"
    except ImportError:
        if requested == "numba":
            raise
        return "numpy"


def active_backend() -> str:
    """Name of the kernel backend in use ('numba' or 'numpy')."""
    global _backend
    if _backend is None:
        _backend = _resolve()
    return _backend
