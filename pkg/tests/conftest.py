import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240901)


def binomial_bounds(n, p, k=3.0):
    """(lo, hi) count bounds at k sigma for Binomial(n, p)."""
    mu = n * p
    sd = np.sqrt(n * p * (1 - p))
    return mu - k * sd, mu + k * sd
