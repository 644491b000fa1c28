import numpy as np
import pytest

from hypdec.field import FreqDensity


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture
def random_density(rng) -> FreqDensity:
    """Random-phase density on a 16 x 16 grid."""
    return FreqDensity(np.exp(2j * np.pi * rng.random((16, 16))))
