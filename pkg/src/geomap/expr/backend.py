"""Kernel backend selection.

The compiled Cython kernel is used when it was built; otherwise the numpy
fallback.  Setting ``GEOMAP_PURE_PYTHON=1`` forces the fallback at import.
"""

import os

from . import _kernel_py

try:
    if os.environ.get("GEOMAP_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure-python backend requested")
    from . import _kernel as _compiled
except ImportError:
    _compiled = None

_active = _compiled if _compiled is not None else _kernel_py


def available():
    names = ["python"]
    if _compiled is not None:
        names.insert(0, "cython")
    return names


def kernel():
    return _active


def name():
    return _active.BACKEND


def use(backend):
    """Switch the active kernel (``"cython"`` or ``"python"``); returns the previous name."""
    global _active
    previous = _active.BACKEND
    if backend == "python":
        _active = _kernel_py
    elif backend == "cython":
        if _compiled is None:
            raise RuntimeError("compiled kernel is not built")
        _active = _compiled
    else:
        raise ValueError(f"unknown backend {backend!r}")
    return previous
