"""Hot inner loops, dispatched to numba or numpy.

The backend is fixed at import time by the ``PDSPLIT_BACKEND`` environment
variable (``numba`` or ``numpy``). When unset, numba is used if it imports
and numpy otherwise. Both implementations live side by side so tests and the
benchmark can call either one explicitly via :func:`get_backend`.
"""
import os
import types

from . import _kernels_numpy

__all__ = [
    "BACKEND", "available_backends", "get_backend",
    "coo_matvec", "coo_rmatvec", "abs_power_sums", "soft_threshold",
    "logistic_terms", "edge_gather", "edge_scatter", "edge_dual_update",
    "neighbor_aggregate",
]

_NAMES = [
    "coo_matvec", "coo_rmatvec", "abs_power_sums", "soft_threshold",
    "logistic_terms", "edge_gather", "edge_scatter", "edge_dual_update",
    "neighbor_aggregate",
]

try:
    from . import _kernels_numba
except ImportError:  # numba missing
    _kernels_numba = None


def available_backends():
    return ["numpy"] + (["numba"] if _kernels_numba is not None else [])


def get_backend(name):
    """Return a namespace holding every kernel of backend ``name``."""
    if name == "numpy":
        mod = _kernels_numpy
    elif name == "numba":
        if _kernels_numba is None:
            raise ImportError("numba backend requested but numba is not installed")
        mod = _kernels_numba
    else:
        raise ValueError(f"unknown backend {name!r}; expected 'numba' or 'numpy'")
    return types.SimpleNamespace(name=name, **{k: getattr(mod, k) for k in _NAMES})


def _select():
    requested = os.environ.get("PDSPLIT_BACKEND", "").strip().lower()
    if requested:
        return requested
    return "numba" if _kernels_numba is not None else "numpy"


BACKEND = _select()
_active = get_backend(BACKEND)

coo_matvec = _active.coo_matvec
coo_rmatvec = _active.coo_rmatvec
abs_power_sums = _active.abs_power_sums
soft_threshold = _active.soft_threshold
logistic_terms = _active.logistic_terms
edge_gather = _active.edge_gather
edge_scatter = _active.edge_scatter
edge_dual_update = _active.edge_dual_update
neighbor_aggregate = _active.neighbor_aggregate
