import numpy as np
import pytest

from spatgmm import _kernels

numba_backend = pytest.importorskip("numba") and _kernels.get_backend("numba")
numpy_backend = _kernels.get_backend("numpy")


def test_backend_selection_flag(monkeypatch):
    monkeypatch.setenv("SPATGMM_DISABLE_NUMBA", "1")
    assert _kernels._select()[0] == "numpy"
    monkeypatch.setenv("SPATGMM_DISABLE_NUMBA", "0")
    assert _kernels._select()[0] == "numba"
    with pytest.raises(ValueError):
        _kernels.get_backend("cuda")


def test_pairwise_distances_agree(rng):
    x = rng.standard_normal((40, 3))
    a = numpy_backend.pairwise_distances(x)
    b = numba_backend.pairwise_distances(x)
    np.testing.assert_allclose(a, b, rtol=1e-14, atol=1e-14)
    assert np.array_equal(b, b.T) and np.all(np.diag(b) == 0)


def test_logsumexp_agree(rng):
    a = rng.standard_normal((30, 4)) * 300
    np.testing.assert_allclose(numpy_backend.logsumexp_rows(a), numba_backend.logsumexp_rows(a), rtol=1e-14)
    from scipy.special import logsumexp

    np.testing.assert_allclose(numba_backend.logsumexp_rows(a), logsumexp(a, axis=1), rtol=1e-14)


def test_kmeans_assign_agree(rng):
    x = rng.standard_normal((100, 5))
    c = rng.standard_normal((4, 5))
    la, da = numpy_backend.kmeans_assign(x, c)
    lb, db = numba_backend.kmeans_assign(x, c)
    assert np.array_equal(la, lb)
    np.testing.assert_allclose(da, db, rtol=1e-12)


def test_contingency_agree(rng):
    a = rng.integers(0, 3, 50)
    b = rng.integers(0, 4, 50)
    assert np.array_equal(numpy_backend.contingency(a, b, 3, 4), numba_backend.contingency(a, b, 3, 4))


def test_spatial_covariance_agree(grid444):
    levels = np.sqrt(grid444.levels)
    a = numpy_backend.spatial_covariance(grid444.level_index, levels, 4.0, 3.0, 2.0)
    b = numba_backend.spatial_covariance(grid444.level_index, levels, 4.0, 3.0, 2.0)
    assert np.array_equal(a, b)
    assert np.array_equal(b, b.T)
