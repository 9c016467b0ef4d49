import numpy as np
import pytest

from cipt.analysis import KLConfig, kl_divergence
from cipt.analysis.kl import silverman_bandwidth
from cipt.errors import ParameterError


def test_gaussian_pair_matches_closed_form(rng):
    # KL(N(1,1) || N(0,1)) = 1/2
    p = rng.normal(1.0, 1.0, 10_000)
    q = rng.normal(0.0, 1.0, 10_000)
    res = kl_divergence(p, q, KLConfig(n_bootstrap=8, seed=7))
    assert abs(res.kl - 0.5) < 0.08
    assert res.stderr > 0.0
    assert not res.infinite


def test_identical_samples_near_zero(rng):
    x = rng.normal(0.0, 2.0, 4000)
    res = kl_divergence(x, x.copy(), KLConfig(n_bootstrap=10, seed=11))
    assert abs(res.kl) <= max(3 * res.stderr, 0.01)


def test_atom_mixture_analytic(rng):
    # delta at zero with weight w plus a positive continuous tail
    n = 6000
    w_p, w_q = 0.5, 0.25
    p = np.where(rng.random(n) < w_p, 0.0, rng.gamma(2.0, 1.0, n))
    q = np.where(rng.random(n) < w_q, 0.0, rng.gamma(2.0, 1.0, n))
    res = kl_divergence(p, q, KLConfig(n_bootstrap=10, seed=3))
    # atom term w_p log(w_p/w_q) plus continuous term (1-w_p) log((1-w_p)/(1-w_q))
    expect = w_p * np.log(w_p / w_q) + (1 - w_p) * np.log((1 - w_p) / (1 - w_q))
    assert abs(res.kl - expect) < max(5 * res.stderr, 0.02)


def test_missing_q_atom_flags_infinite(rng):
    n = 3000
    p = np.where(rng.random(n) < 0.4, 0.0, rng.gamma(2.0, 1.0, n))
    q = rng.gamma(2.0, 1.0, n)  # q has no atom at zero
    res = kl_divergence(p, q, KLConfig(n_bootstrap=10, seed=5))
    # Laplace smoothing keeps the point estimate finite but large
    assert res.kl > 0.5
    n_zero_q = np.count_nonzero(q == 0.0)
    w_q = (n_zero_q + 1) / (n + 2)
    assert w_q == pytest.approx(1 / (n + 2))


def test_bootstrap_tracks_infinite_replicates(rng):
    n = 400
    p = np.where(rng.random(n) < 0.3, 0.0, rng.gamma(2.0, 1.0, n))
    q = np.where(rng.random(n) < 0.02, 0.0, rng.gamma(2.0, 1.0, n))
    res = kl_divergence(p, q, KLConfig(n_bootstrap=50, seed=9))
    assert res.n_infinite_replicates >= 0
    assert res.stderr >= 0.0


def test_silverman_bandwidth_edges(rng):
    assert silverman_bandwidth(np.array([1.0])) == 0.0
    x = np.full(50, 3.0)
    x[0] = 3.1  # IQR zero, std positive
    h = silverman_bandwidth(x)
    assert h > 0.0
    y = rng.normal(0, 1, 500)
    h2 = silverman_bandwidth(y)
    sigma = min(np.std(y),
                (np.percentile(y, 75) - np.percentile(y, 25)) / 1.34)
    assert h2 == pytest.approx(0.9 * sigma * 500 ** (-0.2), rel=1e-12)


def test_empty_or_bad_input():
    with pytest.raises(ParameterError):
        kl_divergence([], [1.0, 2.0])
    with pytest.raises(ParameterError):
        kl_divergence([1.0], [])
    with pytest.raises(ParameterError):
        kl_divergence([1.0, np.nan], [1.0, 2.0])


def test_result_unpacks(rng):
    x = rng.normal(0, 1, 500)
    y = rng.normal(0, 1, 500)
    res = kl_divergence(x, y, KLConfig(n_bootstrap=10, seed=2))
    kl, se = res
    assert kl == res.kl and se == res.stderr
