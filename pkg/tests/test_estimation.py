import math

import numpy as np
import pytest

from conftest import random_params, random_spd
from spatgmm.coords import grid_coords
from spatgmm.covariance import SpatialParams, build_covariance, decay_matrix, factorize
from spatgmm.errors import CollinearityError, EmptyComponentError, NoPositiveDefiniteBetaError
from spatgmm.estimation import (
    ALPHA_FLOOR,
    ComponentFlags,
    GlsWorkspace,
    beta_objective,
    clamp_alphas,
    gls_alpha,
    initial_params,
    jitter_to_pd,
    normal_equations,
    optimize_beta,
    update_component,
    weighted_scatter,
)


def kronecker_gls(decay, v, s):
    """Materialized {D'(V kron V)D}^{-1} D' vec(V S V), for small p only."""
    p = decay.shape[0]
    delta = np.column_stack([np.ones(p * p), -decay.ravel(order="F"), np.eye(p).ravel(order="F")])
    w = np.kron(v, v)
    normal = delta.T @ w @ delta
    rhs = delta.T @ (v @ s @ v).ravel(order="F")
    alpha = np.linalg.solve(normal, rhs) if p > 2 else None
    return normal, rhs, alpha


def _pd_params(rng, cs, beta_hi=10.0):
    # on a 3x3 grid D(beta) equals J - I to machine precision for large beta,
    # which makes the basis collinear, so draw beta from the identifiable range
    while True:
        sp = random_params(rng)
        sp = sp.with_beta(float(np.exp(rng.uniform(np.log(0.5), np.log(beta_hi)))))
        try:
            return sp, factorize(build_covariance(cs, sp))
        except np.linalg.LinAlgError:
            continue


def test_gls_exact_recovery_zero_residual(rng, grid3x3):
    sp, f = _pd_params(rng, grid3x3)
    ws = GlsWorkspace(decay_matrix(grid3x3, sp), random_spd(rng, 9), f.matrix)
    np.testing.assert_allclose(gls_alpha(ws), sp.alphas, rtol=1e-9)


def test_gls_exact_recovery_property(rng, grid3x3):
    worst = 0.0
    for _ in range(100):
        sp, f = _pd_params(rng, grid3x3)
        ws = GlsWorkspace(decay_matrix(grid3x3, sp), f.inverse(), f.matrix)
        worst = max(worst, np.max(np.abs(gls_alpha(ws) - sp.alphas)))
    assert worst <= 1e-8


def test_gls_p1_is_collinear():
    ws = GlsWorkspace(np.zeros((1, 1)), np.eye(1), np.eye(1))
    with pytest.raises(CollinearityError):
        gls_alpha(ws)


def test_gls_saturated_decay_is_collinear(grid3x3):
    ws = GlsWorkspace(decay_matrix(grid3x3, beta=100.0, family="sigmoid"), np.eye(9), np.eye(9))
    with pytest.raises(CollinearityError):
        gls_alpha(ws)


def test_kronecker_trace_equivalence(rng):
    worst = 0.0
    for case in range(50):
        p = (2, 3, 4)[case % 3]
        cs = grid_coords((p,))
        decay = decay_matrix(cs, beta=float(rng.uniform(0.5, 8)), family="sigmoid")
        a = rng.standard_normal((p, p))
        s = a + a.T
        v = random_spd(rng, p, cond=10)
        ws = GlsWorkspace(decay, v, s)
        n_oracle, r_oracle, alpha_oracle = kronecker_gls(decay, v, s)
        normal, rhs = normal_equations(ws)
        np.testing.assert_allclose(normal, n_oracle, rtol=1e-10, atol=1e-10)
        np.testing.assert_allclose(rhs, r_oracle, rtol=1e-10, atol=1e-10)
        if p == 2:
            continue  # with p = 2, J, D and I span only a 2-dimensional space
        worst = max(worst, np.max(np.abs(gls_alpha(ws) - alpha_oracle) / np.maximum(1.0, np.abs(alpha_oracle))))
    assert worst <= 1e-9


def test_gls_relabeling_invariance(rng):
    cs = grid_coords((3, 3))
    decay = decay_matrix(cs, beta=3.0, family="sigmoid")
    s = random_spd(rng, 9)
    v = random_spd(rng, 9, cond=5)
    perm = rng.permutation(9)
    a = gls_alpha(GlsWorkspace(decay, v, s))
    b = gls_alpha(GlsWorkspace(decay[np.ix_(perm, perm)], v[np.ix_(perm, perm)], s[np.ix_(perm, perm)]))
    np.testing.assert_allclose(a, b, rtol=1e-10)


def test_beta_objective_examples(grid3x3):
    sp = SpatialParams(4, 3, 2, beta=4)
    xi = build_covariance(grid3x3, sp)
    p = grid3x3.p
    assert beta_objective(xi, sp.alphas, 4.0, grid3x3) == pytest.approx(0.0, abs=1e-11)
    # log|Xi| - log|2 Xi| + tr(2 I) - p = p - p log 2
    assert beta_objective(2 * xi, sp.alphas, 4.0, grid3x3) == pytest.approx(p - p * math.log(2), abs=1e-11)
    assert beta_objective(xi, (1.0, 50.0, 1e-3), 4.0, grid3x3) == math.inf


def test_beta_objective_finite_or_inf(rng, grid3x3):
    s = random_spd(rng, 9)
    for beta in np.geomspace(0.5, 100, 60):
        v = beta_objective(s, (2.0, 1.5, 0.5), beta, grid3x3)
        assert not math.isnan(v)


def test_optimize_beta_recovers_truth():
    cs = grid_coords((4, 4))
    sp = SpatialParams(4, 3, 2, beta=4)
    res = optimize_beta(build_covariance(cs, sp), sp.alphas, cs)
    assert res.beta == pytest.approx(4.0, abs=1e-3)


def test_optimize_beta_beats_uniform_grid(rng):
    cs = grid_coords((3, 3, 2))
    for _ in range(5):
        sp, f = _pd_params(rng, cs, beta_hi=30)
        noise = random_spd(rng, cs.p, cond=3) * 0.3
        s = f.matrix + noise
        alphas = np.array(sp.alphas) * rng.uniform(0.9, 1.1, 3)
        res = optimize_beta(s, alphas, cs)
        grid = np.linspace(0.5, 100, 200)
        grid_min = min(beta_objective(s, alphas, b, cs, constants=False) for b in grid)
        assert res.value <= grid_min + 1e-6


def test_optimize_beta_all_infinite(grid3x3):
    with pytest.raises(NoPositiveDefiniteBetaError):
        optimize_beta(np.eye(9), (1.0, 50.0, 1e-6), grid3x3)


def test_optimize_beta_bad_bracket(grid3x3):
    with pytest.raises(ValueError):
        optimize_beta(np.eye(9), (1.0, 0.5, 1.0), grid3x3, bracket=(0.1, 5))


def test_weighted_scatter_examples(rng):
    x = rng.standard_normal((1, 3))
    np.testing.assert_array_equal(weighted_scatter(x, np.ones(1), x[0]), np.zeros((3, 3)))
    data = rng.standard_normal((50, 4))
    np.testing.assert_allclose(
        weighted_scatter(data, np.ones(50), data.mean(axis=0)), np.cov(data.T, bias=True), rtol=1e-12
    )
    v = np.array([1.0, -2.0, 0.5])
    np.testing.assert_allclose(weighted_scatter(np.stack([-v, v]), np.ones(2), np.zeros(3)), np.outer(v, v))
    with pytest.raises(EmptyComponentError):
        weighted_scatter(data, np.zeros(50), data.mean(axis=0))
    with pytest.raises(EmptyComponentError):
        weighted_scatter(data, np.full(50, 0.01), data.mean(axis=0), floor=2.0)


def test_clamp_alphas_flags():
    flags = ComponentFlags()
    out = clamp_alphas([1.0, -2.0, 0.0], flags)
    assert out.tolist() == [1.0, ALPHA_FLOOR, ALPHA_FLOOR] and flags.clamps == 1


def test_jitter_to_pd(grid3x3):
    flags = ComponentFlags()
    good = SpatialParams(4, 3, 2, beta=4)
    assert jitter_to_pd(good, grid3x3, flags) is good and flags.jitters == 0
    # slightly indefinite: a tiny alpha3 increase repairs it
    from spatgmm.covariance import decay_levels

    lam = np.linalg.eigvalsh(build_covariance(grid3x3, SpatialParams(4, 3, 1e-8, beta=4)))[0]
    if lam < 0:
        near = SpatialParams(4, 3, -lam * 0.999 + 1e-12, beta=4)
        fixed = jitter_to_pd(near, grid3x3, flags)
        assert fixed is not None and fixed.alpha3 > near.alpha3 and flags.jitters == 1
    hopeless = SpatialParams(1, 80, 1e-6, beta=4)
    assert jitter_to_pd(hopeless, grid3x3, ComponentFlags()) is None
    assert decay_levels(grid3x3, 4.0).shape == grid3x3.levels.shape


def test_update_component_exact_fixed_point(grid444):
    sp = SpatialParams(4, 3, 2, beta=4)
    f = factorize(build_covariance(grid444, sp))
    upd = update_component(f.matrix, grid444, sp, f.inverse())
    np.testing.assert_allclose(upd.params.alphas, sp.alphas, rtol=1e-8)
    assert upd.params.beta == pytest.approx(4.0, abs=1e-3)


def test_update_component_does_not_increase_discrepancy(rng, grid3x3):
    from spatgmm.estimation import Discrepancy
    from spatgmm.covariance import decay_levels

    for _ in range(10):
        sp, f = _pd_params(rng, grid3x3)
        s = f.matrix + 0.5 * random_spd(rng, 9, cond=4)
        prev = SpatialParams(1.0, 0.5, 1.0, beta=2.0)
        upd = update_component(s, grid3x3, prev, factorize(build_covariance(grid3x3, prev)).inverse())
        disc = Discrepancy(s, grid3x3)
        before = disc(prev.alphas, decay_levels(grid3x3, prev.beta))
        after = disc(upd.params.alphas, decay_levels(grid3x3, upd.params.beta))
        assert after <= before + 1e-10 * abs(before)


def test_initial_params_close_to_truth(grid444):
    sp = SpatialParams(4, 3, 2, beta=4)
    s = build_covariance(grid444, sp)
    init = initial_params(s, grid444)
    np.testing.assert_allclose(init.alphas, sp.alphas, rtol=0.25)
    q = initial_params(s, grid444, "quadratic")
    assert q.family.value == "quadratic"
