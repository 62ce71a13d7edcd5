import numpy as np
import pytest

from rtcyl import CrossSection, FluidPair


@pytest.fixture
def interval():
    return CrossSection.interval(1.0)


@pytest.fixture
def disk():
    return CrossSection.disk(1.0)


@pytest.fixture
def heavy_top():
    """Heavy fluid on top, unstable at small sigma on the unit interval."""
    return FluidPair(1.0, 2.0, 1.0, 0.5, 0.3, 10.0)


def rng(seed=0):
    return np.random.default_rng(seed)
