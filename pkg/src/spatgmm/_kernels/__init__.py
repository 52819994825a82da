"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The backend is chosen once at import time. Set ``SPATGMM_DISABLE_NUMBA=1``
(or have numba missing) to run on numpy only. Both backends are importable
directly through :func:`get_backend` for testing and benchmarking.
"""

import os
from types import ModuleType

import numpy as np

from . import _numpy

_FUNCS = ("pairwise_distances", "logsumexp_rows", "kmeans_assign", "contingency", "spatial_covariance")


def _numba_disabled():
    return os.environ.get("SPATGMM_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")


def get_backend(name: str) -> ModuleType:
    """Return the kernel module for ``name`` in {"numpy", "numba"}."""
    if name == "numpy":
        return _numpy
    if name == "numba":
        from . import _numba

        return _numba
    raise ValueError(f"unknown kernel backend {name!r}")


def _select():
    if _numba_disabled():
        return "numpy", _numpy
    try:
        return "numba", get_backend("numba")
    except ImportError:
        return "numpy", _numpy


BACKEND, _impl = _select()


def pairwise_distances(coords):
    """Raw Euclidean distance matrix between the rows of ``coords``."""
    return _impl.pairwise_distances(np.ascontiguousarray(coords, dtype=np.float64))


def spatial_covariance(index, levels, a1, a2, a3):
    """``a1 - a2 * levels[index]`` off the diagonal, ``a1 + a3`` on it."""
    return _impl.spatial_covariance(
        np.ascontiguousarray(index, dtype=np.int64),
        np.ascontiguousarray(levels, dtype=np.float64),
        float(a1),
        float(a2),
        float(a3),
    )


def logsumexp_rows(a):
    return _impl.logsumexp_rows(np.ascontiguousarray(a, dtype=np.float64))


def kmeans_assign(x, centers):
    """Nearest-center labels and squared distances."""
    return _impl.kmeans_assign(
        np.ascontiguousarray(x, dtype=np.float64), np.ascontiguousarray(centers, dtype=np.float64)
    )


def contingency(a, b, ka, kb):
    return _impl.contingency(
        np.ascontiguousarray(a, dtype=np.int64), np.ascontiguousarray(b, dtype=np.int64), int(ka), int(kb)
    )


__all__ = ["BACKEND", "get_backend", *_FUNCS]
