"""Decay functions and linear spatial covariance matrices.

A component covariance is ``alpha1 * J - alpha2 * D + alpha3 * I`` where ``J`` is
the all-ones matrix and ``D`` applies a decay function elementwise to the
normalized distances of a coordinate system. Under the sigmoid family
``D`` depends on a sharpness parameter ``beta``; under the quadratic family
``D`` holds squared distances.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import lapack, solve_triangular

from . import _kernels
from .coords import CoordinateSystem
from .errors import DomainError, NotPositiveDefiniteError

BETA_MIN = 0.5
BETA_MAX = 100.0

# s = 1 / (1 + e^3): value of the raw logistic at distance 0
SIGMOID_OFFSET = 1.0 / (1.0 + math.exp(3.0))


class Family(str, enum.Enum):
    SIGMOID = "sigmoid"
    QUADRATIC = "quadratic"

    @property
    def n_spatial(self) -> int:
        return 4 if self is Family.SIGMOID else 3


@dataclass(frozen=True)
class SpatialParams:
    alpha1: float
    alpha2: float
    alpha3: float
    beta: float = 4.0
    family: Family = Family.SIGMOID

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        for name in ("alpha1", "alpha2", "alpha3", "beta"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not (self.alpha1 > 0 and self.alpha2 > 0 and self.alpha3 > 0):
            raise ValueError(f"alpha parameters must be positive, got {self.alphas}")
        if self.family is Family.SIGMOID and not BETA_MIN <= self.beta <= BETA_MAX:
            raise ValueError(f"beta={self.beta} outside [{BETA_MIN}, {BETA_MAX}]")

    @property
    def alphas(self) -> tuple[float, float, float]:
        return (self.alpha1, self.alpha2, self.alpha3)

    def with_alphas(self, alphas) -> "SpatialParams":
        a1, a2, a3 = (float(a) for a in alphas)
        return replace(self, alpha1=a1, alpha2=a2, alpha3=a3)

    def with_beta(self, beta) -> "SpatialParams":
        return replace(self, beta=float(beta))

    def to_dict(self) -> dict:
        return {
            "alpha1": self.alpha1,
            "alpha2": self.alpha2,
            "alpha3": self.alpha3,
            "beta": self.beta,
            "family": self.family.value,
        }


def sigmoid_h(d, beta):
    """Normalized sigmoid decay; passes through (0, 0) and (2, 1).

    ``d`` may be a scalar or an array of normalized distances in [0, 2].
    """
    d_arr = np.asarray(d, dtype=np.float64)
    if np.any(d_arr < 0.0) or np.any(d_arr > 2.0) or not np.all(np.isfinite(d_arr)):
        raise DomainError("sigmoid decay is defined on normalized distances in [0, 2]")
    if not BETA_MIN <= beta <= BETA_MAX:
        raise DomainError(f"beta={beta} outside [{BETA_MIN}, {BETA_MAX}]")
    # dividing by (raw(2) - s) instead of multiplying by a = 1/(raw(2) - s)
    # makes h(2) = 1 exactly rather than to within one ulp
    top = 1.0 / (1.0 + math.exp(-2.0 * beta + 3.0)) - SIGMOID_OFFSET
    out = (1.0 / (1.0 + np.exp(-beta * d_arr + 3.0)) - SIGMOID_OFFSET) / top
    return float(out) if out.ndim == 0 else out


def quadratic_h(d):
    d_arr = np.asarray(d, dtype=np.float64)
    if np.any(d_arr < 0.0):
        raise DomainError("distances must be nonnegative")
    out = d_arr * d_arr
    return float(out) if out.ndim == 0 else out


def decay_levels(cs: CoordinateSystem, beta=None, family=Family.SIGMOID) -> np.ndarray:
    """Decay function evaluated at each distinct distance of ``cs``."""
    family = Family(family)
    if family is Family.QUADRATIC:
        return cs.levels * cs.levels
    return sigmoid_h(cs.levels, beta) if len(cs.levels) > 1 else np.zeros(1)


def decay_matrix(cs: CoordinateSystem, params: SpatialParams | None = None, *, beta=None, family=None):
    """The matrix ``D`` for a coordinate system.

    Either pass ``params`` or the ``beta``/``family`` pair directly.
    """
    if params is not None:
        beta, family = params.beta, params.family
    family = Family(family or Family.SIGMOID)
    if cs.p == 1:
        return np.zeros((1, 1))
    return decay_levels(cs, beta, family)[cs.level_index]


def covariance_from_levels(cs: CoordinateSystem, alphas, levels_h) -> np.ndarray:
    """Covariance from decay values at the distinct distances (see :func:`decay_levels`)."""
    a1, a2, a3 = alphas
    return _kernels.spatial_covariance(cs.level_index, levels_h, a1, a2, a3)


def combine(alphas, decay: np.ndarray) -> np.ndarray:
    """``alpha1 J - alpha2 D + alpha3 I`` for an explicit ``D``."""
    a1, a2, a3 = alphas
    out = a1 - a2 * decay
    out[np.diag_indices_from(out)] = a1 + a3
    return out


def build_covariance(cs: CoordinateSystem, params: SpatialParams) -> np.ndarray:
    """Covariance matrix; exactly symmetric since both triangles come from one index."""
    return covariance_from_levels(cs, params.alphas, decay_levels(cs, params.beta, params.family))


@dataclass(frozen=True, eq=False)
class CovarianceFactor:
    matrix: np.ndarray
    chol: np.ndarray
    logdet: float

    @property
    def p(self) -> int:
        return self.matrix.shape[0]

    def solve(self, rhs):
        return solve(self, rhs)

    def inverse(self) -> np.ndarray:
        linv = solve_triangular(self.chol, np.eye(self.p), lower=True, check_finite=False)
        inv = linv.T @ linv
        return 0.5 * (inv + inv.T)

    def mahalanobis(self, centered: np.ndarray) -> np.ndarray:
        """Squared Mahalanobis norms of the rows of ``centered``."""
        w = solve_triangular(self.chol, centered.T, lower=True, check_finite=False)
        return np.einsum("ij,ij->j", w, w)


def factorize(matrix) -> CovarianceFactor:
    """Cholesky-factorize a symmetric matrix.

    Raises
    ------
    NotPositiveDefiniteError
        If the matrix is not (numerically) positive definite. Nothing is
        regularized here; callers decide between jitter and rejection.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    chol = cholesky_lower(matrix)
    return CovarianceFactor(matrix=matrix, chol=chol, logdet=float(2.0 * np.log(np.diag(chol)).sum()))


def cholesky_lower(matrix) -> np.ndarray:
    """Lower Cholesky factor with a zeroed upper triangle."""
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError("matrix must be square")
    if not np.all(np.isfinite(matrix)):
        raise NotPositiveDefiniteError("matrix has non-finite entries")
    chol, info = lapack.dpotrf(matrix, lower=1, clean=1)
    if info != 0:
        raise NotPositiveDefiniteError(f"leading minor of order {info} is not positive definite")
    return chol


def solve(factor: CovarianceFactor, rhs):
    """``matrix^{-1} @ rhs`` through two triangular solves."""
    rhs = np.asarray(rhs, dtype=np.float64)
    y = solve_triangular(factor.chol, rhs, lower=True, check_finite=False)
    return solve_triangular(factor.chol, y, lower=True, trans="T", check_finite=False)
