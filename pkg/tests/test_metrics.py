from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spatgmm.metrics import ContingencyTable, ari, rand_index


def brute_force(a, b):
    """ARI and RI from explicit enumeration of all observation pairs."""
    pairs = list(combinations(range(len(a)), 2))
    same_a = np.array([a[i] == a[j] for i, j in pairs])
    same_b = np.array([b[i] == b[j] for i, j in pairs])
    n11 = int(np.sum(same_a & same_b))
    na, nb, total = int(same_a.sum()), int(same_b.sum()), len(pairs)
    ri = (n11 + int(np.sum(~same_a & ~same_b))) / total
    expected = na * nb / total
    den = 0.5 * (na + nb) - expected
    return (1.0 if den == 0 else (n11 - expected) / den), ri


def test_ari_examples():
    a = [1, 1, 2, 2]
    assert ari(a, a) == 1.0
    assert ari(a, [7, 7, 3, 3]) == 1.0
    # enumeration of the 6 pairs: no pair together in both, 2 together in each,
    # expected index 2/3, so ARI = (0 - 2/3) / (2 - 2/3) = -1/2
    assert brute_force(a, [1, 2, 1, 2])[0] == pytest.approx(-0.5, abs=1e-15)
    assert ari(a, [1, 2, 1, 2]) == pytest.approx(-0.5, abs=1e-15)


def test_rand_examples():
    assert rand_index([1, 1, 2, 2], [1, 1, 2, 2]) == 1.0
    assert rand_index([1, 1, 2, 2], [1, 2, 1, 2]) == pytest.approx(2 / 6, abs=1e-15)
    assert rand_index([0, 1, 2], [5, 6, 7]) == 1.0


def test_degenerate_denominator():
    assert ari([0, 1, 2, 3], [3, 2, 1, 0]) == 1.0
    assert ari([0, 0, 0], [1, 1, 1]) == 1.0


def test_errors():
    with pytest.raises(ValueError):
        ari([0, 1], [0, 1, 1])
    with pytest.raises(ValueError):
        ari([0], [0])


def test_brute_force_oracle_200_cases():
    rng = np.random.default_rng(12)
    worst_ari = worst_ri = 0.0
    for _ in range(200):
        n = int(rng.integers(2, 13))
        a = rng.integers(0, int(rng.integers(1, 5)), n)
        b = rng.integers(0, int(rng.integers(1, 5)), n)
        ref_ari, ref_ri = brute_force(a, b)
        worst_ari = max(worst_ari, abs(ari(a, b) - ref_ari))
        worst_ri = max(worst_ri, abs(rand_index(a, b) - ref_ri))
    assert worst_ari <= 1e-12 and worst_ri <= 1e-12


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 4), st.integers(0, 4)), min_size=2, max_size=40))
def test_symmetry_and_relabeling(pairs):
    a = np.array([p[0] for p in pairs])
    b = np.array([p[1] for p in pairs])
    assert ari(a, b) == ari(b, a)
    relabel = np.array([3, 0, 4, 1, 2])
    assert ari(relabel[a], b) == ari(a, b)
    assert ari(a, relabel[b] + 10) == ari(a, b)
    assert ari(a, b) <= 1.0


def test_contingency_consistency():
    t = ContingencyTable.from_labels([0, 0, 1, 2, 2, 2], ["x", "y", "y", "x", "x", "y"])
    assert t.n == 6
    assert t.rows.tolist() == [2, 1, 3] and t.cols.tolist() == [3, 3]
    assert t.counts.sum() == 6


def test_large_counts_exact():
    # pair counts beyond 2^53 stay exact in integer arithmetic
    n = 200_000
    a = np.zeros(n, dtype=np.int64)
    b = (np.arange(n) < n - 1).astype(np.int64)
    assert ari(a, b) == 0.0
    assert 0.99998 < rand_index(a, b) < 1.0


def test_match_components():
    from spatgmm.metrics import match_components

    true = np.array([0, 0, 1, 1, 2, 2])
    fitted = np.array([2, 2, 0, 0, 1, 0])
    assert match_components(true, fitted, 3) == {0: 2, 1: 0, 2: 1}
