"""Backend selection for the compiled kernels.

Kernels are written twice: a numba ``@njit`` loop version and a vectorised
numpy version.  Set ``LINEKIT_PURE_NUMPY=1`` to force the numpy path (also
used automatically when numba cannot be imported).  Both paths produce
bit-identical results.
"""
import os

_FLAG = "LINEKIT_PURE_NUMPY"

try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None

HAVE_NUMBA = _numba is not None


def numba_enabled() -> bool:
    return HAVE_NUMBA and os.environ.get(_FLAG, "").strip().lower() not in ("1", "true", "yes")


def njit(fn):
    """Compile ``fn`` with numba when available, otherwise return it unchanged."""
    if not HAVE_NUMBA:
        return fn
    return _numba.njit(cache=True)(fn)


def backend() -> str:
    return "numba" if numba_enabled() else "numpy"
