"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy
kernels. Set ``JOINTFILTER_BACKEND=python`` to force the fallback.
"""

import logging
import os

from . import _pykernels

log = logging.getLogger(__name__)

_compiled = None
if os.environ.get("JOINTFILTER_BACKEND", "").lower() != "python":
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        log.debug("compiled kernels unavailable, using numpy fallback")

BACKENDS = {"python": _pykernels}
if _compiled is not None:
    BACKENDS["compiled"] = _compiled

_active = "compiled" if _compiled is not None else "python"
_threads = 1


def get_backend():
    return _active


def set_backend(name):
    global _active
    if name not in BACKENDS:
        raise ValueError(f"unknown or unavailable backend {name!r}; have {sorted(BACKENDS)}")
    _active = name


def kernels(name=None):
    return BACKENDS[name or _active]


def get_num_threads():
    return _threads


def set_num_threads(n):
    """Worker threads for the compiled kernels. Output bits do not depend on it."""
    global _threads
    n = int(n)
    if n < 1:
        raise ValueError("threads must be >= 1")
    _threads = n
