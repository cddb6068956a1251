"""Kernel backend selection.

The compiled ``_kernels`` extension is preferred. Setting the environment
variable ``SADDLESOR_PURE_PYTHON=1`` before import forces the fallback.
"""

import os

from . import _fallback

if os.environ.get("SADDLESOR_PURE_PYTHON", "").strip() not in ("", "0"):
    _compiled = None
else:
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None

kernels = _compiled if _compiled is not None else _fallback
BACKEND = "cython" if _compiled is not None else "python"

__all__ = ["kernels", "BACKEND", "get_kernels"]


def get_kernels(name=None):
    """Return a kernel module by name ('cython' or 'python'); default is the active one."""
    if name is None:
        return kernels
    if name == "python":
        return _fallback
    if name == "cython":
        if _compiled is None:
            raise ImportError("compiled kernels are not available")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")
