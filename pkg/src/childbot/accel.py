"""Numba dispatch.

Hot kernels are written twice: a ``@njit`` loop version and a vectorised
numpy version.  The loop version is used unless numba is missing or the
environment variable ``CHILDBOT_DISABLE_NUMBA`` is set to a non-empty value
other than ``0``.  Both are always importable so they can be compared.
"""
import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

DISABLED = os.environ.get("CHILDBOT_DISABLE_NUMBA", "") not in ("", "0")
HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and not DISABLED


def njit(*args, **kwargs):
    """``numba.njit`` with ``cache=True``; identity decorator without numba."""
    if not HAVE_NUMBA:
        if len(args) == 1 and callable(args[0]):
            return args[0]
        return lambda f: f
    kwargs.setdefault("cache", True)
    return numba.njit(*args, **kwargs)


def pick(numba_impl, numpy_impl):
    return numba_impl if USE_NUMBA else numpy_impl


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
