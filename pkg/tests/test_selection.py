import math

import numpy as np
import pytest

from spatgmm.coords import grid_coords
from spatgmm.covariance import SpatialParams
from spatgmm.errors import FitError
from spatgmm.mixture import FitConfig
from spatgmm.selection import ModelScore, bic, compare_constraint, count_params, scores_csv, select_g
from spatgmm.simulate import SimSpec, sample


def test_count_params_examples():
    assert count_params(3, 125, "sigmoid", False) == 389
    assert count_params(1, 1, "quadratic", False) == 4
    assert count_params(2, 100, "sigmoid", True) == 205
    assert count_params(2, 3, "full") == 1 + 6 + 2 * 6


def test_count_params_hand_enumerated():
    rng = np.random.default_rng(8)
    for _ in range(20):
        G, p = int(rng.integers(1, 7)), int(rng.integers(1, 130))
        family = ["sigmoid", "quadratic", "full"][int(rng.integers(3))]
        constrained = bool(rng.integers(2)) and family != "full"
        names = [f"pi{g}" for g in range(G - 1)] + [f"mu{g}_{j}" for g in range(G) for j in range(p)]
        sets = 1 if constrained else G
        if family == "sigmoid":
            names += [f"{n}{s}" for s in range(sets) for n in ("a1", "a2", "a3", "beta")]
        elif family == "quadratic":
            names += [f"{n}{s}" for s in range(sets) for n in ("a1", "a2", "a3")]
        else:
            names += [f"cov{g}_{i}_{j}" for g in range(G) for i in range(p) for j in range(i, p)]
        assert count_params(G, p, family, constrained) == len(names)


def test_bic_examples():
    assert bic(0.0, 1, 1) == 0.0
    assert bic(-100.0, 10, math.e) == pytest.approx(-210.0, rel=1e-15)
    with pytest.raises(ValueError):
        bic(0.0, 1, 0)


def test_bic_decreasing_in_k():
    vals = [bic(-50.0, k, 10) for k in range(1, 20)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def _single_component_data():
    sp = SpatialParams(4, 3, 2, beta=4)
    cs = grid_coords((3, 3))
    spec = SimSpec(shape=(3, 3), pi=[1.0], mu=np.zeros((1, 9)), spatial=[sp], n=500, seed=1, coords=cs)
    return sample(spec)[0], cs


def test_select_g_single_component():
    x, cs = _single_component_data()
    sel = select_g(x, cs, [1, 2, 3], FitConfig(n_starts=2, max_iter=200))
    assert [s.G for s in sel.scores] == [1, 2, 3]
    assert sel.best_score.G == 1
    # best is the argmax of a recomputed BIC
    recomputed = [bic(s.loglik, s.k, len(x)) for s in sel.scores]
    assert sel.best == int(np.argmax(recomputed))
    assert sel.best_result.model.G == 1


def test_select_g_single_candidate():
    x, cs = _single_component_data()
    sel = select_g(x, cs, [2], FitConfig(n_starts=1, max_iter=50))
    assert len(sel.scores) == 1 and sel.best_score.G == 2


def test_select_g_records_failures():
    x, cs = _single_component_data()
    sel = select_g(x, cs, [1, 400], FitConfig(n_starts=1, max_iter=50))
    assert 400 in sel.failures and sel.best_score.G == 1
    with pytest.raises(FitError):
        select_g(x, cs, [400], FitConfig(n_starts=1))


def test_compare_constraint_g1_differs_only_by_k():
    x, cs = _single_component_data()
    free, shared, _, _ = compare_constraint(x, cs, 1, FitConfig(n_starts=1))
    assert free.k == shared.k
    assert free.loglik == pytest.approx(shared.loglik, rel=1e-12)


def test_scores_csv_header():
    s = ModelScore(G=2, family="sigmoid", constrained=False, loglik=-1.5, k=10, bic=-3.0 - 10 * math.log(5))
    text = scores_csv([s])
    lines = text.splitlines()
    assert lines[0] == "G,family,constrained,loglik,k,bic,converged"
    assert lines[1].startswith("2,sigmoid,false,-1.5,10,")
