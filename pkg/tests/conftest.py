import numpy as np
import pytest

from qedmbpt.radial import build_spectrum, make_grid


@pytest.fixture(scope="session")
def grid10():
    return make_grid(100, 1e-7, 6.0)


@pytest.fixture(scope="session")
def spectrum10(grid10):
    """Z = 10 spectrum for s, p and d symmetries on a 100-point grid."""
    return build_spectrum(10.0, [-1, 1, -2, 2, -3], grid10)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
