"""Spatially constrained Gaussian mixtures fitted by EM with an embedded GLS step."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import _kernels
from .coords import CoordinateSystem
from .covariance import (
    BETA_MAX,
    BETA_MIN,
    CovarianceFactor,
    Family,
    SpatialParams,
    build_covariance,
    factorize,
)
from .errors import EmptyComponentError, FitError, NotPositiveDefiniteError
from .estimation import (
    JITTER_START,
    JITTER_STOP,
    ComponentFlags,
    initial_params,
    update_component,
    weighted_scatter,
)
from .selection import bic, count_params

log = logging.getLogger(__name__)

LOG_2PI = math.log(2.0 * math.pi)
MONOTONE_RTOL = 1e-6


@dataclass(frozen=True)
class FitConfig:
    tol: float = 1e-8
    max_iter: int = 500
    n_starts: int = 5
    seed: int = 0
    init_strategy: str = "kmeans"
    family: Family = Family.SIGMOID
    constrained: bool = False
    beta_bracket: tuple[float, float] = (BETA_MIN, BETA_MAX)
    n_floor: float = 2.0
    # damp GLS steps that would lower the expected complete-data likelihood
    safeguard: bool = True
    beta_grid: int = 17

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        object.__setattr__(self, "beta_bracket", tuple(float(b) for b in self.beta_bracket))
        if self.init_strategy not in INIT_STRATEGIES:
            raise ValueError(f"init_strategy must be one of {INIT_STRATEGIES}")
        if self.n_starts < 1 or self.max_iter < 1:
            raise ValueError("n_starts and max_iter must be >= 1")


INIT_STRATEGIES = ("kmeans", "random-resp")


class MixtureModel:
    """G-component mixture with linear spatial covariances on a shared coordinate system."""

    def __init__(self, pi, mu, spatial, cs: CoordinateSystem, constrained: bool = False):
        pi = np.asarray(pi, dtype=np.float64)
        mu = np.atleast_2d(np.asarray(mu, dtype=np.float64))
        spatial = list(spatial)
        if not (len(pi) == len(mu) == len(spatial)) or mu.shape[1] != cs.p:
            raise ValueError("pi, mu and spatial must describe the same G components of dimension p")
        if np.any(pi <= 0) or abs(pi.sum() - 1.0) > 1e-12:
            raise ValueError(f"mixing proportions must be positive and sum to 1, got {pi}")
        if constrained and any(sp != spatial[0] for sp in spatial):
            raise ValueError("a constrained model needs identical spatial parameters in every component")
        self.pi = pi
        self.mu = mu
        self.spatial = spatial
        self.cs = cs
        self.constrained = bool(constrained)
        self.factors  # noqa: B018  validates positive definiteness

    @property
    def G(self) -> int:
        return len(self.pi)

    @property
    def p(self) -> int:
        return self.cs.p

    @property
    def family(self) -> Family:
        return self.spatial[0].family

    @cached_property
    def factors(self) -> list[CovarianceFactor]:
        if self.constrained:
            f = factorize(build_covariance(self.cs, self.spatial[0]))
            return [f] * self.G
        return [factorize(build_covariance(self.cs, sp)) for sp in self.spatial]

    def covariances(self):
        return [f.matrix for f in self.factors]

    def permute(self, order) -> "MixtureModel":
        order = list(order)
        return MixtureModel(self.pi[order], self.mu[order], [self.spatial[k] for k in order], self.cs, self.constrained)

    def n_params(self) -> int:
        return count_params(self.G, self.p, self.family, self.constrained)


@dataclass(frozen=True)
class BaselineModel:
    """Unconstrained full-covariance Gaussian mixture."""

    pi: np.ndarray
    mu: np.ndarray
    cov: np.ndarray

    @property
    def G(self):
        return len(self.pi)

    @property
    def p(self):
        return self.mu.shape[1]

    @cached_property
    def factors(self):
        return [factorize(c) for c in self.cov]

    def n_params(self):
        return count_params(self.G, self.p, "full", False)


@dataclass
class FitResult:
    model: MixtureModel | BaselineModel
    resp: np.ndarray
    loglik_trace: list[float]
    bic: float
    iterations: int
    converged: bool
    hard_labels: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    @property
    def loglik(self) -> float:
        return self.loglik_trace[-1]

    @property
    def n_params(self) -> int:
        return self.model.n_params()


def component_log_pdf(data, mu, factors) -> np.ndarray:
    """``(N, G)`` matrix of Gaussian log-densities."""
    data = np.atleast_2d(data)
    p = data.shape[1]
    out = np.empty((data.shape[0], len(factors)))
    for g, f in enumerate(factors):
        maha = f.mahalanobis(data - mu[g])
        out[:, g] = -0.5 * (p * LOG_2PI + f.logdet + maha)
    return out


def _weighted_log_pdf(data, model):
    return component_log_pdf(data, model.mu, model.factors) + np.log(model.pi)


def log_density(x, model) -> float | np.ndarray:
    """Log mixture density of one observation (1-D input) or of each row."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    out = _kernels.logsumexp_rows(_weighted_log_pdf(np.atleast_2d(x), model))
    return float(out[0]) if single else out


def e_step(data, model):
    """Posterior responsibilities and the observed-data log-likelihood."""
    wl = _weighted_log_pdf(data, model)
    lse = _kernels.logsumexp_rows(wl)
    z = np.exp(wl - lse[:, None])
    z /= z.sum(axis=1, keepdims=True)
    return z, float(lse.sum())


def m_step_moments(data, resp, floor: float = 0.0):
    """Closed-form mixing proportions, means and component weights ``N_g``."""
    resp = np.asarray(resp, dtype=np.float64)
    ng = resp.sum(axis=0)
    for g, w in enumerate(ng):
        if not w > 0 or w < floor:
            raise EmptyComponentError(g, float(w), floor)
    pi = ng / resp.shape[0]
    pi = pi / pi.sum()
    mu = (resp.T @ data) / ng[:, None]
    return pi, mu, ng


def hard_labels(resp) -> np.ndarray:
    # argmax returns the first maximum, i.e. ties go to the smallest index
    return np.argmax(resp, axis=1).astype(np.int64)


def _scatters(data, resp, mu, floor):
    return [weighted_scatter(data, resp[:, g], mu[g], floor) for g in range(resp.shape[1])]


def pooled_scatter(scatters, ng):
    w = np.asarray(ng) / np.sum(ng)
    return sum(wg * s for wg, s in zip(w, scatters))


def m_step_covariance(data, resp, mu, model: MixtureModel, config: FitConfig, ng=None, flags=None):
    """Updated spatial parameters for every component (one shared set if constrained).

    The GLS weight is the inverse of each component's covariance in ``model``.
    """
    if ng is None:
        ng = resp.sum(axis=0)
    scatters = _scatters(data, resp, mu, 0.0)
    kw = dict(bracket=config.beta_bracket, safeguard=config.safeguard, n_grid=config.beta_grid)
    if model.constrained:
        upd = update_component(pooled_scatter(scatters, ng), model.cs, model.spatial[0], model.factors[0].inverse(), **kw)
        if flags is not None:
            for fl in flags:
                fl.merge(upd.flags)
        return [upd.params] * model.G
    out = []
    for g in range(model.G):
        upd = update_component(scatters[g], model.cs, model.spatial[g], model.factors[g].inverse(), **kw)
        if flags is not None:
            flags[g].merge(upd.flags)
        out.append(upd.params)
    return out


def initial_model(data, resp, cs, config: FitConfig) -> MixtureModel:
    pi, mu, ng = m_step_moments(data, resp, config.n_floor)
    scatters = _scatters(data, resp, mu, config.n_floor)
    if config.constrained:
        sp = initial_params(pooled_scatter(scatters, ng), cs, config.family)
        spatial = [sp] * len(pi)
    else:
        spatial = [initial_params(s, cs, config.family) for s in scatters]
    return MixtureModel(pi, mu, spatial, cs, config.constrained)


def initialize(data, G: int, seed, strategy: str = "kmeans", n_lloyd: int = 20) -> np.ndarray:
    """Starting responsibilities.

    ``kmeans`` gives hard assignments from k-means++ seeding followed by
    ``n_lloyd`` Lloyd iterations; ``random-resp`` draws each row from a
    symmetric Dirichlet(1).
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    data = np.asarray(data, dtype=np.float64)
    n = data.shape[0]
    if strategy == "random-resp":
        return rng.dirichlet(np.ones(G), size=n)
    if strategy != "kmeans":
        raise ValueError(f"unknown init strategy {strategy!r}")
    labels = kmeans(data, G, rng, n_lloyd)
    z = np.zeros((n, G))
    z[np.arange(n), labels] = 1.0
    return z


def kmeans_pp_centers(data, G, rng):
    n = data.shape[0]
    centers = np.empty((G, data.shape[1]))
    centers[0] = data[rng.integers(n)]
    _, d2 = _kernels.kmeans_assign(data, centers[:1])
    for k in range(1, G):
        total = d2.sum()
        idx = rng.choice(n, p=d2 / total) if total > 0 else rng.integers(n)
        centers[k] = data[idx]
        _, dk = _kernels.kmeans_assign(data, centers[k : k + 1])
        d2 = np.minimum(d2, dk)
    return centers


def kmeans(data, G, rng, n_lloyd=20):
    centers = kmeans_pp_centers(data, G, rng)
    labels, _ = _kernels.kmeans_assign(data, centers)
    for _ in range(n_lloyd):
        for k in range(G):
            members = labels == k
            if members.any():
                centers[k] = data[members].mean(axis=0)
        new, _ = _kernels.kmeans_assign(data, centers)
        if np.array_equal(new, labels):
            break
        labels = new
    return labels


def _start_rngs(seed, n):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def _run_em(data, cs, resp0, config: FitConfig) -> FitResult:
    G = resp0.shape[1]
    model = initial_model(data, resp0, cs, config)
    flags = [ComponentFlags() for _ in range(G)]
    z, ll = e_step(data, model)
    trace = [ll]
    monotone_reverts = 0
    consecutive = 0
    converged = False
    iterations = 0
    for it in range(1, config.max_iter + 1):
        iterations = it
        pi, mu, ng = m_step_moments(data, z, config.n_floor)
        spatial = m_step_covariance(data, z, mu, model, config, ng, flags)
        cand = MixtureModel(pi, mu, spatial, cs, config.constrained)
        z_new, ll_new = e_step(data, cand)
        if ll_new < ll - MONOTONE_RTOL * abs(ll):
            monotone_reverts += 1
            consecutive += 1
            log.debug("iteration %d lowered loglik %.6f -> %.6f; reverting covariances", it, ll, ll_new)
            cand = MixtureModel(pi, mu, model.spatial, cs, config.constrained)
            z_new, ll_new = e_step(data, cand)
        else:
            consecutive = 0
        delta = ll_new - ll
        model, z, ll = cand, z_new, ll_new
        trace.append(ll)
        if consecutive >= 2:
            break
        if abs(delta) < config.tol * abs(ll):
            converged = True
            break
    return FitResult(
        model=model,
        resp=z,
        loglik_trace=trace,
        bic=bic(ll, model.n_params(), data.shape[0]),
        iterations=iterations,
        converged=converged,
        hard_labels=hard_labels(z),
        diagnostics={
            "components": [f.as_dict() for f in flags],
            "monotonicity_reverts": monotone_reverts,
        },
    )


def _check_inputs(data, G, config, p_min):
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2:
        raise ValueError("data must be an N x p matrix")
    if not np.all(np.isfinite(data)):
        raise ValueError("data contains non-finite values")
    n, p = data.shape
    if G < 1:
        raise ValueError("G must be >= 1")
    if n <= G * config.n_floor:
        raise ValueError(f"need N > G * n_floor = {G * config.n_floor}, got N={n}")
    if p < p_min:
        raise ValueError(f"spatial covariance families need p >= {p_min}")
    return data


def _best_of_starts(runner, data, G, config):
    results, failures = [], []
    for s, rng in enumerate(_start_rngs(config.seed, config.n_starts)):
        try:
            resp0 = initialize(data, G, rng, config.init_strategy)
            res = runner(resp0)
        except (EmptyComponentError, NotPositiveDefiniteError, np.linalg.LinAlgError, ValueError) as exc:
            log.info("start %d failed: %s", s, exc)
            failures.append({"start": s, "error": f"{type(exc).__name__}: {exc}"})
            continue
        log.info("start %d: loglik %.4f after %d iterations", s, res.loglik, res.iterations)
        results.append((s, res))
    if not results:
        raise FitError(f"all {config.n_starts} starts failed", failures)
    s_best, best = max(results, key=lambda sr: (sr[1].loglik, -sr[0]))
    best.diagnostics["start"] = s_best
    best.diagnostics["restarts"] = [
        {"start": s, "loglik": r.loglik, "iterations": r.iterations, "converged": r.converged} for s, r in results
    ] + failures
    best.diagnostics["monotonicity_reverts_all_starts"] = sum(
        r.diagnostics.get("monotonicity_reverts", 0) for _, r in results
    )
    return best


def fit(data, cs: CoordinateSystem, G: int, config: FitConfig | None = None) -> FitResult:
    """Fit a G-component spatial mixture; best of ``config.n_starts`` restarts."""
    config = config or FitConfig()
    data = _check_inputs(data, G, config, p_min=2)
    if data.shape[1] != cs.p:
        raise ValueError(f"data has {data.shape[1]} columns but the coordinate system has {cs.p} elements")
    return _best_of_starts(lambda resp0: _run_em(data, cs, resp0, config), data, G, config)


def _pd_covariance(s, flags):
    try:
        factorize(s)
        return s
    except NotPositiveDefiniteError:
        pass
    level = max(np.trace(s) / s.shape[0], 1e-12)
    eps = JITTER_START
    while True:
        cand = s + (eps * level) * np.eye(s.shape[0])
        try:
            factorize(cand)
            flags.jitters += 1
            return cand
        except NotPositiveDefiniteError:
            if eps > JITTER_STOP:
                raise
            eps *= 10.0


def _run_baseline(data, resp0, config):
    G = resp0.shape[1]
    flags = [ComponentFlags() for _ in range(G)]

    def m_step(z):
        pi, mu, _ = m_step_moments(data, z, config.n_floor)
        cov = np.array([_pd_covariance(s, flags[g]) for g, s in enumerate(_scatters(data, z, mu, 0.0))])
        return BaselineModel(pi, mu, cov)

    model = m_step(resp0)
    z, ll = e_step(data, model)
    trace, converged, iterations = [ll], False, 0
    for it in range(1, config.max_iter + 1):
        iterations = it
        model = m_step(z)
        z, ll_new = e_step(data, model)
        trace.append(ll_new)
        delta, ll = ll_new - ll, ll_new
        if abs(delta) < config.tol * abs(ll):
            converged = True
            break
    return FitResult(
        model=model,
        resp=z,
        loglik_trace=trace,
        bic=bic(ll, model.n_params(), data.shape[0]),
        iterations=iterations,
        converged=converged,
        hard_labels=hard_labels(z),
        diagnostics={"components": [f.as_dict() for f in flags], "monotonicity_reverts": 0},
    )


def fit_baseline_gmm(data, G: int, config: FitConfig | None = None) -> FitResult:
    """Plain full-covariance GMM fitted by EM, for comparison."""
    config = config or FitConfig()
    data = _check_inputs(data, G, config, p_min=1)
    return _best_of_starts(lambda resp0: _run_baseline(data, resp0, config), data, G, config)


def center_by_group(data, labels, groups=None) -> np.ndarray:
    """Subtract the within-label mean from each observation.

    ``groups``, when given, lists the admissible label values.
    """
    data = np.asarray(data, dtype=np.float64)
    labels = np.asarray(labels)
    if labels.shape != (data.shape[0],):
        raise ValueError("need one label per observation")
    present = np.unique(labels)
    if groups is not None:
        unknown = np.setdiff1d(present, np.asarray(groups))
        if unknown.size:
            raise ValueError(f"unknown labels {unknown.tolist()}")
    out = data.copy()
    for lab in present:
        rows = labels == lab
        out[rows] -= data[rows].mean(axis=0)
    return out
