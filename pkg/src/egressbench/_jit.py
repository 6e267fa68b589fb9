"""numba shim: fall back to plain Python when numba is unavailable.

Kernels are written so the jitted and interpreted paths execute the same
floating-point operations in the same order.
"""

from __future__ import annotations

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def decorate(func):
            return func

        return decorate
