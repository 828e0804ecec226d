"""Numba switch for the hot kernels.

Set ``EDAKIT_NUMBA=0`` before import to run every kernel as plain
numpy/Python. The kernels are written so that both paths execute the same
source.
"""
import os

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

USE_NUMBA = numba is not None and os.environ.get("EDAKIT_NUMBA", "1").lower() not in ("0", "false", "no", "off")


def jit(func=None, **kwargs):
    """``numba.njit(cache=True)`` when enabled, identity otherwise."""
    def wrap(f):
        if not USE_NUMBA:
            return f
        opts = {"cache": True, "nogil": True}
        opts.update(kwargs)
        return numba.njit(**opts)(f)

    if func is not None:
        return wrap(func)
    return wrap
