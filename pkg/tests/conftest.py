import numpy as np
import pytest

from spatgmm import SpatialParams, grid_coords, preset, sample

# criterion number -> PASS/FAIL line, filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[number])


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def grid3x3():
    return grid_coords((3, 3))


@pytest.fixture(scope="session")
def grid444():
    return grid_coords((4, 4, 4))


def random_spd(rng, p, cond=50.0):
    q, _ = np.linalg.qr(rng.standard_normal((p, p)))
    ev = np.geomspace(1.0, cond, p)
    m = (q * ev) @ q.T
    return 0.5 * (m + m.T)


def random_params(rng, family="sigmoid"):
    a1 = rng.uniform(1.0, 5.0)
    a2 = rng.uniform(0.2, 0.9) * a1
    a3 = rng.uniform(0.5, 3.0)
    return SpatialParams(a1, a2, a3, beta=float(np.exp(rng.uniform(np.log(0.5), np.log(100)))), family=family)


@pytest.fixture(scope="session")
def design_i_small():
    """One design I dataset with the default N."""
    spec = preset("I", n=1000, seed=3)
    data, labels = sample(spec)
    return spec, data, labels
