"""Backend selection for the hot kernels.

The compiled extension is used when it imports cleanly; otherwise the
pure-Python fallback is used. Setting ``CASCADIA_PURE_PYTHON=1`` forces the
fallback.
"""
from __future__ import annotations

import os

from . import _pykernels

python_backend = _pykernels
compiled_backend = None

if os.environ.get("CASCADIA_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as compiled_backend
    except ImportError:  # extension not built
        compiled_backend = None

active = compiled_backend if compiled_backend is not None else python_backend
BACKEND = active.BACKEND


def get(name=None):
    """Return a backend module by name ('python', 'compiled') or the active one."""
    if name is None:
        return active
    if name == "python":
        return python_backend
    if name in ("compiled", "cython"):
        if compiled_backend is None:
            raise ImportError("compiled kernels are not built")
        return compiled_backend
    raise ValueError(f"unknown backend {name!r}")
