import numpy as np
import pytest

from cipt.errors import InsufficientDataError, ParameterError
from cipt.observables import (CircuitStats, circuit_stats_arrays,
                              decomposition_components,
                              ensemble_series_stats, ensemble_stats,
                              quantum_var_estimate, series_circuit_moments)


def test_decomposition_identity(rng):
    # total shot variance = between-circuit + mean within-circuit, exactly
    values = rng.normal(0.3, 0.2, size=(40, 250))
    total, between, within = decomposition_components(values)
    assert abs(total - (between + within)) < 1e-10


def test_quantum_var_expectation_mode_exact():
    # expectation mode: every shot carries the same (<Mz>, <Mz^2>)
    mz = np.full(64, 0.25)
    mz_sq = np.full(64, 0.5)
    qv, s_b2, _ = quantum_var_estimate(mz, mz_sq)
    assert abs(qv - (0.5 - 0.25 ** 2)) < 1e-14
    assert s_b2 == 0.0


def test_quantum_var_bitstring_unbiased(rng):
    # bitstring mode (mz_sq = mz^2): the estimator reduces to the unbiased
    # sample variance of the sampled values
    n = 2000
    trials = np.empty(200)
    for i in range(len(trials)):
        mz = rng.choice([-1.0, 1.0], size=n)
        qv, _, _ = quantum_var_estimate(mz, mz * mz)
        trials[i] = qv
    se = trials.std(ddof=1) / np.sqrt(len(trials))
    assert abs(trials.mean() - 1.0) < 3 * se


def test_quantum_var_jackknife_tracks_spread(rng):
    n = 400
    reps = np.empty(300)
    jk = np.empty(300)
    for i in range(len(reps)):
        mz = rng.normal(0.0, 0.5, n)
        mz_sq = mz * mz + rng.uniform(0.2, 0.4, n)
        reps[i], _, jk[i] = quantum_var_estimate(mz, mz_sq)
    # jackknife variance estimates the sampling variance of the estimator
    ratio = jk.mean() / reps.var(ddof=1)
    assert 0.7 < ratio < 1.4


def test_quantum_var_insufficient():
    with pytest.raises(InsufficientDataError):
        quantum_var_estimate(np.array([0.1]), np.array([0.1]))


def _mk_stats(rng, n_circ=8, L=8, p=0.5, qv_loc=0.05):
    out = []
    for ci in range(n_circ):
        mz = rng.normal(0.2, 0.1, 500)
        mz_sq = mz * mz + qv_loc
        out.append(circuit_stats_arrays(
            "statevector", "expectation", L, p, 32, ci, mz, mz_sq))
    return out


def test_circuit_stats_from_arrays(rng):
    st = _mk_stats(rng)[0]
    assert st.n_shots == 500
    assert st.backend == "statevector"
    assert abs(st.quantum_var - 0.05) < 0.02


def test_ensemble_stats_aggregates(rng):
    stats = _mk_stats(rng, n_circ=24)
    ens = ensemble_stats(stats)
    assert ens.n_circuits == 24
    assert abs(ens.mz_bar - 0.2) < 5 * ens.mz_bar_se
    assert ens.var_q >= 0.0
    assert np.isfinite(ens.var_q_se)
    assert 0.0 <= ens.zero_frac <= 1.0


def test_ensemble_stats_rejects_mixed_grids(rng):
    stats = _mk_stats(rng, n_circ=3, L=8) + _mk_stats(rng, n_circ=3, L=10)
    with pytest.raises(ParameterError):
        ensemble_stats(stats)


def test_ensemble_stats_insufficient(rng):
    with pytest.raises(InsufficientDataError):
        ensemble_stats(_mk_stats(rng, n_circ=1))


def test_ensemble_stats_two_circuits_nan_ses(rng):
    ens = ensemble_stats(_mk_stats(rng, n_circ=2))
    assert np.isfinite(ens.mz_bar)
    # spread summaries need >= 3 circuits; with 2 they are flagged not faked
    assert np.isnan(ens.var_q_se)


def test_series_moments_match_batch(rng):
    # per-step reductions agree with direct computation from counts
    L, n_shots = 6, 400
    ones = rng.integers(0, L + 1, size=(5, n_shots))
    s1 = ones.sum(axis=1)
    s2 = (ones * ones).sum(axis=1)
    mz, qv = series_circuit_moments(s1, s2, L, n_shots)
    for k in range(5):
        m = (L - 2.0 * ones[k]) / L
        assert abs(mz[k] - m.mean()) < 1e-12
        assert abs(qv[k] - m.var(ddof=1)) < 1e-12


def test_ensemble_series_stats_shapes(rng):
    L, n_shots, t = 6, 300, 10
    series = []
    for _ in range(6):
        ones = rng.integers(0, L + 1, size=(t + 1, n_shots))
        series.append((ones.sum(axis=1), (ones * ones).sum(axis=1)))
    out = ensemble_series_stats(series, L, n_shots)
    assert out["mz_bar"].shape == (t + 1,)
    assert out["var_q"].shape == (t + 1,)
    assert np.all(np.isfinite(out["mz_bar_se"]))
    with pytest.raises(InsufficientDataError):
        ensemble_series_stats(series[:1], L, n_shots)
