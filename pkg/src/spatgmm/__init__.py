"""Spatially constrained Gaussian mixture models for tensor-shaped observations."""

from .coords import CoordinateSystem, TensorShape, custom_coords, grid_coords, normalize_distances, vec_index
from .covariance import (
    BETA_MAX,
    BETA_MIN,
    CovarianceFactor,
    Family,
    SpatialParams,
    build_covariance,
    decay_matrix,
    factorize,
    quadratic_h,
    sigmoid_h,
    solve,
)
from .estimation import GlsWorkspace, beta_objective, gls_alpha, optimize_beta, weighted_scatter
from .metrics import ari, rand_index
from .mixture import (
    FitConfig,
    FitResult,
    MixtureModel,
    center_by_group,
    e_step,
    fit,
    fit_baseline_gmm,
    initialize,
    log_density,
    m_step_covariance,
    m_step_moments,
)
from .selection import ModelScore, bic, compare_constraint, count_params, select_g
from .simulate import SimSpec, preset, sample

__version__ = "0.1.0"
