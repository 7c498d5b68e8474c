import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(7)


def random_image(rng, h, w, c=1, lo=0.0, hi=1.0):
    return rng.uniform(lo, hi, size=(h, w, c))


@pytest.fixture
def small_image(rng):
    return random_image(rng, 8, 8, 1)
