"""Backend selection for the hot Gram-Schmidt kernel.

The compiled extension is used when it imports; otherwise the pure-Python
version is used.  ``BACKEND`` names the active choice.
"""
import numpy as np

from . import _gs_fallback

try:
    from . import _gs_kernel as _compiled
except ImportError:
    _compiled = None

_BACKENDS = {"python": _gs_fallback.gs_extend}
if _compiled is not None:
    _BACKENDS["cython"] = _compiled.gs_extend

BACKEND = "cython" if _compiled is not None else "python"
_active = _BACKENDS[BACKEND]


def available_backends():
    return sorted(_BACKENDS)


def set_backend(name):
    """Switch the kernel used by :func:`gs_extend`; returns the previous name."""
    global BACKEND, _active
    if name not in _BACKENDS:
        raise ValueError(f"backend {name!r} not available; have {available_backends()}")
    previous = BACKEND
    BACKEND, _active = name, _BACKENDS[name]
    return previous


def gs_extend(Q, k, C, tol):
    """Orthonormally append rows of ``C`` to ``Q[:k]`` in place; return new k."""
    C = np.ascontiguousarray(C, dtype=np.float64)
    if C.ndim != 2 or C.shape[0] == 0:
        return k
    return int(_active(Q, int(k), C, float(tol)))
