"""Kernel selection: compiled extension when importable, numpy fallback otherwise.

Set ``DAMREG_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _simplex_py

KERNELS = {"python": _simplex_py}

try:
    from . import _simplex_cy
except ImportError:  # extension not built
    _simplex_cy = None
else:
    KERNELS["cython"] = _simplex_cy

if os.environ.get("DAMREG_PURE_PYTHON") or _simplex_cy is None:
    BACKEND = "python"
else:
    BACKEND = "cython"


def get_kernel(name=None):
    """Return the kernel module for ``name`` (default: the import-time choice)."""
    name = name or BACKEND
    try:
        return KERNELS[name]
    except KeyError:
        raise ValueError(f"kernel {name!r} unavailable; have {sorted(KERNELS)}") from None
