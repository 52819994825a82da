import numpy as np
import pytest

from spatgmm.coords import grid_coords
from spatgmm.covariance import SpatialParams, build_covariance
from spatgmm.errors import NotPositiveDefiniteError
from spatgmm.simulate import DESIGN_II_PI, RNG_ALGORITHM, SimSpec, preset, sample


def test_preset_i():
    spec = preset("I")
    assert spec.shape.dims == (5, 5, 5)
    assert spec.pi.tolist() == [0.2, 0.3, 0.5]
    assert np.all(spec.mu == 0)
    assert spec.spatial[2] == SpatialParams(4, 3, 2, beta=10)


def test_preset_ii():
    spec = preset("II")
    assert spec.G == 4
    assert [float(m[0]) for m in spec.mu] == [0, 5, 10, -5]
    assert all(np.all(m == m[0]) for m in spec.mu)
    assert spec.pi.tolist() == list(DESIGN_II_PI)
    assert spec.spatial[3] == SpatialParams(1, 1, 1, beta=10)
    custom = preset("II", pi=[0.25] * 4)
    assert custom.pi.tolist() == [0.25] * 4


def test_preset_iii():
    spec = preset("III")
    assert spec.shape.dims == (10, 10)
    assert spec.spatial == preset("I").spatial
    with pytest.raises(ValueError):
        preset("IV")


def test_sample_shapes_and_determinism():
    spec = preset("I", n=500, seed=3)
    x, y = sample(spec)
    assert x.shape == (500, 125) and y.shape == (500,)
    x2, y2 = sample(preset("I", n=500, seed=3))
    assert np.array_equal(x, x2) and np.array_equal(y, y2)
    x3, _ = sample(preset("I", n=500, seed=4))
    assert not np.array_equal(x, x3)


def test_block_streams_do_not_depend_on_n():
    # rows of the first block are the same whatever the total N
    small, _ = sample(preset("III", n=1000, seed=1))
    big, _ = sample(preset("III", n=3000, seed=1))
    labels_small = sample(preset("III", n=1000, seed=1))[1]
    labels_big = sample(preset("III", n=3000, seed=1))[1]
    if np.array_equal(labels_small, labels_big[:1000]):
        assert np.array_equal(small, big[:1000])


def test_label_frequencies():
    _, y = sample(preset("I", n=10000, seed=2))
    freq = np.bincount(y, minlength=3) / 10000
    assert np.max(np.abs(freq - [0.2, 0.3, 0.5])) < 0.02


def test_nugget_only_model_is_spherical():
    cs = grid_coords((2, 2))
    sp = SpatialParams(1e-8, 1e-8, 2.5, beta=4)
    spec = SimSpec(shape=(2, 2), pi=[1.0], mu=np.zeros((1, 4)), spatial=[sp], n=5000, seed=9, coords=cs)
    x, _ = sample(spec)
    emp = x.T @ x / 5000
    se = np.sqrt(2 * 2.5**2 / 5000)  # SE of a Gaussian variance estimate; off-diagonals are smaller
    assert np.max(np.abs(emp - 2.5 * np.eye(4))) < 5 * se


def test_group_covariance_monte_carlo():
    cs = grid_coords((2, 2, 2))
    sp = SpatialParams(4, 3, 2, beta=10)
    spec = SimSpec(shape=(2, 2, 2), pi=[1.0], mu=np.zeros((1, 8)), spatial=[sp], n=5000, seed=5, coords=cs)
    x, _ = sample(spec)
    xi = build_covariance(cs, sp)
    emp = x.T @ x / 5000
    # Monte-Carlo SE of entry (i, j): sqrt((xi_ij^2 + xi_ii xi_jj) / N)
    se = np.sqrt((xi**2 + np.outer(np.diag(xi), np.diag(xi))) / 5000)
    assert np.all(np.abs(emp - xi) < 4 * se)


def test_spec_validation():
    with pytest.raises(ValueError):
        SimSpec(shape=(2,), pi=[0.5, 0.6], mu=np.zeros((2, 2)), spatial=[SpatialParams(1, 1, 1)] * 2)
    with pytest.raises(NotPositiveDefiniteError):
        SimSpec(shape=(3, 3), pi=[1.0], mu=np.zeros((1, 9)), spatial=[SpatialParams(1, 80, 1e-6)])


def test_spec_dict_roundtrip():
    spec = preset("II", n=20, seed=6)
    d = spec.to_dict()
    assert d["rng"] == RNG_ALGORITHM
    back = SimSpec.from_dict(d)
    assert np.array_equal(back.mu, spec.mu) and back.spatial == spec.spatial and back.seed == 6
    assert np.array_equal(sample(back)[0], sample(spec)[0])
    levels = SimSpec.from_dict({**d, "mu": [0, 5, 10, -5]})
    assert np.array_equal(levels.mu, spec.mu)
