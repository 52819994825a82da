"""Estimators for the spatial covariance parameters of one component.

The linear coefficients ``(alpha1, alpha2, alpha3)`` come from a closed-form
generalized least squares fit of the weighted scatter matrix onto the basis
``(J, -D(beta), I)``; ``beta`` is then chosen by bounded one-dimensional
minimization of the Gaussian ML discrepancy

    F(beta) = log|Xi| - log|S| + tr(S Xi^{-1}) - p.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lapack
from scipy.optimize import minimize_scalar

from .coords import CoordinateSystem
from .covariance import (
    BETA_MAX,
    BETA_MIN,
    Family,
    SpatialParams,
    cholesky_lower,
    covariance_from_levels,
    decay_levels,
    decay_matrix,
)
from .errors import (
    CollinearityError,
    EmptyComponentError,
    NoPositiveDefiniteBetaError,
    NotPositiveDefiniteError,
)

ALPHA_FLOOR = 1e-8
JITTER_START = 1e-8
JITTER_STOP = 1e-2
NORMAL_RCOND = 1e-12
# discrepancy increases below this relative size are round-off, not real
SAFEGUARD_RTOL = 1e-10


@dataclass
class GlsWorkspace:
    """Inputs of one GLS update.

    ``decay`` is ``D`` itself; the basis carries it with a minus sign so that
    the returned ``alpha2`` is positive for a decaying covariance.
    ``weight`` is the inverse of the previous covariance estimate (or ``I``).
    """

    decay: np.ndarray
    weight: np.ndarray
    scatter: np.ndarray

    @property
    def p(self) -> int:
        return self.decay.shape[0]

    def basis(self):
        p = self.p
        return (np.ones((p, p)), -self.decay, np.eye(p))


def normal_equations(ws: GlsWorkspace):
    """3x3 normal matrix and right-hand side from trace identities.

    Entry (i, j) is ``tr(A_i V A_j V)`` and entry i of the rhs is
    ``tr(A_i V S V)``; with ``J = 1 1'`` most traces collapse to vector
    products, so nothing of size p^2 x p^2 is formed.
    """
    d, v, s = ws.decay, ws.weight, ws.scatter
    u = v.sum(axis=1)
    vv = v @ v
    dv = d @ v
    one_v_one = u.sum()
    udu = u @ d @ u
    uu = u @ u
    tr_dvdv = np.sum(dv * dv.T)
    tr_dvv = np.sum(d * vv)
    tr_vv = np.sum(v * v)
    normal = np.array(
        [
            [one_v_one**2, -udu, uu],
            [-udu, tr_dvdv, -tr_dvv],
            [uu, -tr_dvv, tr_vv],
        ]
    )
    r = v @ s @ v
    rhs = np.array([r.sum(), -np.sum(d * r), np.trace(r)])
    return normal, rhs


def gls_alpha(ws: GlsWorkspace) -> np.ndarray:
    """Unconstrained GLS coefficients ``(alpha1, alpha2, alpha3)``."""
    normal, rhs = normal_equations(ws)
    sv = np.linalg.svd(normal, compute_uv=False)
    if sv[0] <= 0 or sv[-1] < NORMAL_RCOND * sv[0]:
        raise CollinearityError("GLS normal matrix is singular; the basis J, D, I is collinear")
    return np.linalg.solve(normal, rhs)


def weighted_scatter(data, resp_g, mu_g, floor: float = 0.0) -> np.ndarray:
    """``(1/N_g) sum_i z_ig (x_i - mu)(x_i - mu)'`` with ``N_g = sum_i z_ig``."""
    resp_g = np.asarray(resp_g, dtype=np.float64)
    ng = resp_g.sum()
    if not ng > 0 or ng < floor:
        raise EmptyComponentError(None, ng, floor)
    centered = np.asarray(data, dtype=np.float64) - mu_g
    s = (centered * resp_g[:, None]).T @ centered / ng
    return 0.5 * (s + s.T)


class Discrepancy:
    """Evaluates ``log|Xi| + tr(S Xi^{-1})`` for one fixed scatter matrix ``S``.

    ``tr(S Xi^{-1})`` is a dot product of the lower triangle of ``Xi^{-1}``
    (from LAPACK ``potri``) with precomputed weights ``2 tril(S, -1) + diag(S)``.
    """

    def __init__(self, s, cs: CoordinateSystem):
        s = np.asarray(s, dtype=np.float64)
        self.s = s
        self.cs = cs
        self._weights = np.ascontiguousarray(2.0 * np.tril(s, -1) + np.diag(np.diag(s)))

    def __call__(self, alphas, levels_h) -> float:
        """Surrogate value, or ``+inf`` if the covariance is not positive definite."""
        try:
            chol = cholesky_lower(covariance_from_levels(self.cs, alphas, levels_h))
        except NotPositiveDefiniteError:
            return math.inf
        inv, info = lapack.dpotri(chol, lower=1)
        if info != 0:
            return math.inf
        return float(2.0 * np.log(np.diag(chol)).sum() + np.vdot(self._weights, inv))

    def log_det_scatter(self) -> float:
        sign, logdet = np.linalg.slogdet(self.s)
        if sign <= 0:
            raise NotPositiveDefiniteError("scatter matrix is singular; log|S| undefined")
        return float(logdet)


def beta_objective(s, alphas, beta, cs: CoordinateSystem, *, constants: bool = True) -> float:
    """ML discrepancy ``F`` at ``beta``; ``+inf`` when the covariance is not PD.

    With ``constants=False`` the beta-independent ``-log|S| - p`` is dropped.
    """
    disc = Discrepancy(s, cs)
    value = disc(alphas, decay_levels(cs, beta, Family.SIGMOID))
    if constants and math.isfinite(value):
        value += -disc.log_det_scatter() - cs.p
    return value


@dataclass
class BetaSearch:
    beta: float
    value: float
    evaluations: int


def optimize_beta(
    s,
    alphas,
    cs: CoordinateSystem,
    bracket=(BETA_MIN, BETA_MAX),
    *,
    n_grid: int = 33,
    rtol: float = 1e-6,
    start: float | None = None,
) -> BetaSearch:
    """Minimize the discrepancy over ``beta`` inside ``bracket``.

    A log-spaced scan locates the basin of the smallest value, then bounded
    Brent (golden section with parabolic steps) refines it between the two
    neighbouring scan points. ``start`` (e.g. the previous estimate) is added
    to the scan.
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    if not BETA_MIN <= lo < hi <= BETA_MAX:
        raise ValueError(f"bracket {bracket} must lie inside [{BETA_MIN}, {BETA_MAX}]")
    disc = Discrepancy(s, cs)

    def objective(beta):
        return disc(alphas, decay_levels(cs, beta, Family.SIGMOID))

    grid = np.geomspace(lo, hi, n_grid)
    if start is not None and lo <= start <= hi:
        grid = np.unique(np.append(grid, float(start)))
    values = np.array([objective(b) for b in grid])
    n_eval = len(grid)
    finite = np.isfinite(values)
    if not finite.any():
        raise NoPositiveDefiniteBetaError(f"no beta in [{lo}, {hi}] gives a positive definite covariance")
    k = int(np.argmin(np.where(finite, values, np.inf)))
    best_beta, best_val = float(grid[k]), float(values[k])
    a, b = float(grid[max(k - 1, 0)]), float(grid[min(k + 1, len(grid) - 1)])
    penalty = float(values[finite].max()) + 1e6 * (1.0 + abs(float(values[finite].max())))

    def f(beta):
        val = objective(beta)
        return val if math.isfinite(val) else penalty

    if b > a:
        res = minimize_scalar(f, bounds=(a, b), method="bounded", options={"xatol": rtol * best_beta, "maxiter": 200})
        n_eval += int(res.nfev)
        if res.fun < best_val:
            best_beta, best_val = float(res.x), float(res.fun)
    return BetaSearch(beta=best_beta, value=best_val, evaluations=n_eval)


@dataclass
class ComponentFlags:
    """Per-component counters of the safeguards applied during a fit."""

    clamps: int = 0
    jitters: int = 0
    reverts: int = 0
    beta_failures: int = 0
    alpha_backtracks: int = 0
    collinear: int = 0

    def as_dict(self):
        return dict(self.__dict__)

    def merge(self, other: "ComponentFlags"):
        for k, v in other.__dict__.items():
            setattr(self, k, getattr(self, k) + v)


@dataclass
class ComponentUpdate:
    params: SpatialParams
    flags: ComponentFlags = field(default_factory=ComponentFlags)


def clamp_alphas(alphas, flags: ComponentFlags):
    out = np.asarray(alphas, dtype=np.float64).copy()
    bad = ~(out > 0)
    if bad.any():
        out[bad] = ALPHA_FLOOR
        flags.clamps += 1
    return out


def jitter_to_pd(params: SpatialParams, cs: CoordinateSystem, flags: ComponentFlags):
    """Return params whose covariance factorizes, raising ``alpha3`` if needed.

    Adding ``eps * tr(Xi)/p * I`` keeps the linear structure: it only moves
    ``alpha3``. Returns ``None`` when even the largest jitter fails.
    """
    levels_h = decay_levels(cs, params.beta, params.family)
    level = params.alpha1 + params.alpha3
    eps = 0.0
    while eps <= JITTER_STOP * (1 + 1e-12):
        a3 = params.alpha3 + eps * level
        try:
            cholesky_lower(covariance_from_levels(cs, (params.alpha1, params.alpha2, a3), levels_h))
        except NotPositiveDefiniteError:
            eps = JITTER_START if eps == 0.0 else eps * 10.0
            continue
        if eps == 0.0:
            return params
        flags.jitters += 1
        return params.with_alphas((params.alpha1, params.alpha2, a3))
    return None


def update_component(
    s,
    cs: CoordinateSystem,
    prev: SpatialParams,
    weight,
    *,
    bracket=(BETA_MIN, BETA_MAX),
    safeguard: bool = True,
    n_grid: int = 33,
) -> ComponentUpdate:
    """One covariance M-step for a component: GLS for alpha at the previous
    beta, then a beta search at the new alpha.

    With ``safeguard`` the GLS step is damped (halved, at most 30 times) if it
    would increase the discrepancy relative to ``prev``, and a new beta is only
    accepted if it does not increase it either, so each covariance update is
    a generalized-EM step. ``prev`` must itself factorize.
    """
    flags = ComponentFlags()
    prev_alphas = np.array(prev.alphas)
    ws = GlsWorkspace(decay=decay_matrix(cs, prev), weight=weight, scatter=s)
    try:
        alphas = clamp_alphas(gls_alpha(ws), flags)
    except CollinearityError:
        # a saturated decay (D = J - I on small grids) leaves alpha unidentified;
        # keep the previous alphas and let the beta step move away
        flags.collinear += 1
        alphas = prev_alphas.copy()
    disc = Discrepancy(s, cs)
    levels_prev = decay_levels(cs, prev.beta, prev.family)

    if safeguard:
        f_prev = disc(prev_alphas, levels_prev)
        f_new = disc(alphas, levels_prev)
        f_ok = f_prev + SAFEGUARD_RTOL * abs(f_prev)
        t = 1.0
        halvings = 0
        while not f_new <= f_ok and halvings < 30:
            t *= 0.5
            halvings += 1
            alphas = clamp_alphas(prev_alphas + t * (alphas - prev_alphas), flags)
            f_new = disc(alphas, levels_prev)
        if halvings:
            flags.alpha_backtracks += 1
        if not f_new <= f_ok:
            alphas, f_new = prev_alphas, f_prev
    params = prev.with_alphas(alphas)

    if prev.family is Family.SIGMOID:
        try:
            search = optimize_beta(s, alphas, cs, bracket, n_grid=n_grid, start=prev.beta)
            if not safeguard or search.value <= f_new + SAFEGUARD_RTOL * abs(f_new):
                params = params.with_beta(search.beta)
        except NoPositiveDefiniteBetaError:
            flags.beta_failures += 1

    fixed = jitter_to_pd(params, cs, flags)
    if fixed is None:
        flags.reverts += 1
        fixed = prev
    return ComponentUpdate(params=fixed, flags=flags)


def initial_params(s, cs: CoordinateSystem, family=Family.SIGMOID, *, n_grid: int = 17) -> SpatialParams:
    """Starting spatial parameters from unweighted least squares.

    For the sigmoid family, each beta on a coarse log grid gets its OLS alphas
    and the pair with the smallest discrepancy wins.
    """
    family = Family(family)
    eye = np.eye(cs.p)
    flags = ComponentFlags()
    disc = Discrepancy(s, cs)
    betas = np.geomspace(BETA_MIN, 20.0, n_grid) if family is Family.SIGMOID else [4.0]
    best = None
    for beta in betas:
        decay = decay_matrix(cs, beta=beta, family=family)
        try:
            alphas = clamp_alphas(gls_alpha(GlsWorkspace(decay, eye, s)), flags)
        except CollinearityError:
            continue
        params = SpatialParams(*alphas, beta=beta, family=family)
        params = jitter_to_pd(params, cs, flags)
        if params is None:
            continue
        val = disc(params.alphas, decay_levels(cs, params.beta, family))
        if best is None or val < best[0]:
            best = (val, params)
    if best is None:
        level = max(float(np.trace(s)) / cs.p, ALPHA_FLOOR)
        return SpatialParams(ALPHA_FLOOR, ALPHA_FLOOR, level, beta=4.0, family=family)
    return best[1]
