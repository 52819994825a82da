"""Tensor shapes, vectorization order and normalized coordinate distances.

Elements of an order-M tensor with dims ``(p_1, ..., p_M)`` are flattened with
the first subscript varying fastest, so subscript ``(i_1, ..., i_M)`` (1-based)
lands at position ``1 + sum_m (i_m - 1) * prod_{m' < m} p_{m'}``. This is numpy's
Fortran order.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from . import _kernels
from .errors import DegenerateCoordinatesError, ShapeError

MAX_NORMALIZED_DISTANCE = 2.0


@dataclass(frozen=True)
class TensorShape:
    dims: tuple[int, ...]

    def __init__(self, dims):
        if isinstance(dims, (int, np.integer)):
            dims = (dims,)
        dims = tuple(int(d) for d in dims)
        if len(dims) < 1:
            raise ShapeError("a tensor shape needs at least one dimension")
        if any(d < 1 for d in dims):
            raise ShapeError(f"all dims must be >= 1, got {dims}")
        object.__setattr__(self, "dims", dims)

    @property
    def order(self) -> int:
        return len(self.dims)

    @property
    def p(self) -> int:
        return math.prod(self.dims)

    def __str__(self):
        return "x".join(str(d) for d in self.dims)

    @classmethod
    def parse(cls, text: str) -> "TensorShape":
        """Parse ``"5x5x5"`` (also accepts ``,`` or ``*`` separators)."""
        parts = [t for t in text.replace("*", "x").replace(",", "x").lower().split("x") if t.strip()]
        try:
            return cls(int(t) for t in parts)
        except ValueError as exc:
            raise ShapeError(f"cannot parse tensor shape {text!r}") from exc


def vec_index(subscripts: Sequence[int], shape: TensorShape) -> int:
    """1-based position of a 1-based subscript tuple in vectorization order."""
    if len(subscripts) != shape.order:
        raise ShapeError(f"expected {shape.order} subscripts, got {len(subscripts)}")
    j = 1
    stride = 1
    for i, p in zip(subscripts, shape.dims):
        if not 1 <= i <= p:
            raise IndexError(f"subscript {i} out of range 1..{p}")
        j += (i - 1) * stride
        stride *= p
    return j


def subscripts_of(shape: TensorShape) -> np.ndarray:
    """All 1-based subscripts as a ``(p, M)`` array, row ``j-1`` holding element ``j``."""
    grids = np.meshgrid(*[np.arange(1, d + 1) for d in shape.dims], indexing="ij")
    return np.stack([g.ravel(order="F") for g in grids], axis=1)


def normalize_distances(raw: np.ndarray) -> np.ndarray:
    """Scale a distance matrix so that its largest entry is exactly 2."""
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim != 2 or raw.shape[0] != raw.shape[1]:
        raise ShapeError("distance matrix must be square")
    if raw.shape[0] < 2:
        return np.zeros_like(raw)
    off = raw[~np.eye(raw.shape[0], dtype=bool)]
    if np.any(off < 0) or not np.all(np.isfinite(off)):
        raise ValueError("distances must be finite and nonnegative")
    dmax = off.max()
    if dmax <= 0.0:
        raise DegenerateCoordinatesError("all pairwise distances are zero")
    out = raw * (MAX_NORMALIZED_DISTANCE / dmax)
    # pin the attained maximum exactly; scaling can otherwise land one ulp off
    out[raw == dmax] = MAX_NORMALIZED_DISTANCE
    np.fill_diagonal(out, 0.0)
    return out


@dataclass(frozen=True, eq=False)
class CoordinateSystem:
    """Per-element coordinates of a tensor shape plus normalized distances.

    ``mode`` records whether the coordinates are the subscript grid or were
    supplied explicitly; the io module serializes only the latter in full.
    """

    shape: TensorShape
    coords: np.ndarray
    dist: np.ndarray = field(repr=False)
    mode: str = "grid"

    @property
    def p(self) -> int:
        return self.shape.p

    @cached_property
    def _levels(self):
        values, inverse = np.unique(self.dist, return_inverse=True)
        inverse = inverse.reshape(self.dist.shape).astype(np.int64)
        values.setflags(write=False)
        inverse.setflags(write=False)
        return values, inverse

    @property
    def levels(self) -> np.ndarray:
        """Sorted distinct distance values."""
        return self._levels[0]

    @property
    def level_index(self) -> np.ndarray:
        """``(p, p)`` index into :attr:`levels`; ``levels[level_index] == dist``."""
        return self._levels[1]


def _finish(shape, coords, mode):
    coords = np.array(coords, dtype=np.float64)
    coords.setflags(write=False)
    dist = normalize_distances(_kernels.pairwise_distances(coords)) if shape.p > 1 else np.zeros((1, 1))
    dist.setflags(write=False)
    return CoordinateSystem(shape=shape, coords=coords, dist=dist, mode=mode)


def grid_coords(shape: TensorShape) -> CoordinateSystem:
    """Coordinate system given by the element subscripts."""
    if not isinstance(shape, TensorShape):
        shape = TensorShape(shape)
    return _finish(shape, subscripts_of(shape), "grid")


def custom_coords(shape: TensorShape, coords) -> CoordinateSystem:
    """Coordinate system from user-supplied coordinates, one row per element."""
    if not isinstance(shape, TensorShape):
        shape = TensorShape(shape)
    coords = np.asarray(coords, dtype=np.float64)
    if coords.ndim == 1:
        coords = coords[:, None]
    if coords.shape[0] != shape.p:
        raise ShapeError(f"expected {shape.p} coordinate vectors, got {coords.shape[0]}")
    if not np.all(np.isfinite(coords)):
        raise ValueError("coordinates must be finite")
    if len(np.unique(coords, axis=0)) != coords.shape[0]:
        raise DegenerateCoordinatesError("coordinates must be pairwise distinct")
    return _finish(shape, coords, "explicit")


def enumerate_subscripts(shape: TensorShape):
    """Iterate subscripts in vectorization order (first index fastest)."""
    for rev in itertools.product(*[range(1, d + 1) for d in reversed(shape.dims)]):
        yield tuple(reversed(rev))
