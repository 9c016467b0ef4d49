"""Fluctuation statistics over shots and circuits.

The total variance of an observable over the full ensemble splits into
circuit-to-circuit fluctuations of the trajectory mean plus the mean
trajectory (quantum) fluctuation. Per circuit the quantum fluctuation of Mz
is E_m[<Mz^2>] - (E_m[<Mz>])^2, estimated unbiasedly from per-shot pairs
(A_j, B_j) = (<Mz^2>_j, <Mz>_j) as

    qv_hat = mean(A) - mean(B^2) + s_B^2

with s_B^2 the unbiased over-shots sample variance of B (this is where the
n/(n-1) correction enters). In bitstring mode A_j = B_j^2 by construction
and the estimator degrades gracefully to the plain sample variance; both
modes estimate the same population quantity (the terminal-collapse variance
is part of <Mz^2>).

Ensemble level: Var_Q = the over-circuits variance of qv_hat, reported raw
and jackknife-debiased (the per-circuit sampling variance of qv_hat inflates
the raw value; its jackknife estimate is subtracted). Standard errors are
delete-one-circuit jackknives throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDataError, ParameterError

#: |quantum_var| at or below this counts as an exact zero (absorbed circuits)
ZERO_TOL = 1e-12


@dataclass(frozen=True)
class CircuitStats:
    """Shot-averaged statistics of one circuit at one (L, p, t)."""

    backend: str
    mode: str
    L: int
    p: float
    t: int
    circuit_index: int
    n_shots: int
    mz_mean: float
    mz_second: float
    quantum_var: float
    mz_shot_var: float
    quantum_var_sampling_var: float


@dataclass(frozen=True)
class EnsembleStats:
    """Across-circuit statistics at one (backend, mode, L, p, t)."""

    backend: str
    mode: str
    L: int
    p: float
    t: int
    mz_bar: float
    mz_bar_se: float
    var_q: float
    var_q_se: float
    var_circuit: float
    n_circuits: int
    n_shots: int
    var_q_debiased: float
    var_circuit_se: float
    zero_frac: float


def quantum_var_estimate(mz: np.ndarray, mz_sq: np.ndarray):
    """(qv_hat, s_B^2, jackknife variance of qv_hat) from per-shot moments."""
    n = len(mz)
    if n < 2:
        raise InsufficientDataError("need at least 2 shots per circuit")
    b = np.asarray(mz, dtype=np.float64)
    a = np.asarray(mz_sq, dtype=np.float64)
    b2 = b * b
    s_b2 = float(b.var(ddof=1))
    qv = float(a.mean() - b2.mean() + s_b2)

    if n < 4:
        return qv, s_b2, float("nan")
    # delete-one-shot jackknife of qv_hat, O(n) via running sums
    sa = a.sum()
    sb = b.sum()
    sb2 = b2.sum()
    mean_a_loo = (sa - a) / (n - 1)
    mean_b2_loo = (sb2 - b2) / (n - 1)
    s2_loo = (sb2 - b2 - (sb - b) ** 2 / (n - 1)) / (n - 2)
    qv_loo = mean_a_loo - mean_b2_loo + s2_loo
    jk_var = float((n - 1) / n * ((qv_loo - qv_loo.mean()) ** 2).sum())
    return qv, s_b2, jk_var


def circuit_stats_arrays(backend: str, mode: str, L: int, p: float, t: int,
                         circuit_index: int, mz: np.ndarray,
                         mz_sq: np.ndarray) -> CircuitStats:
    """CircuitStats from per-shot (mz, mz_sq) arrays."""
    qv, s_b2, jk = quantum_var_estimate(mz, mz_sq)
    return CircuitStats(backend=backend, mode=mode, L=L, p=p, t=t,
                        circuit_index=circuit_index, n_shots=len(mz),
                        mz_mean=float(np.mean(mz)),
                        mz_second=float(np.mean(mz_sq)),
                        quantum_var=qv, mz_shot_var=s_b2,
                        quantum_var_sampling_var=jk)


def circuit_stats(shots, L: int, p: float, t: int,
                  circuit_index: int) -> CircuitStats:
    """CircuitStats from a ShotBatch or a list of ShotRecord."""
    if hasattr(shots, "mz"):  # ShotBatch
        return circuit_stats_arrays(shots.backend, shots.mode, L, p, t,
                                    circuit_index, shots.mz, shots.mz_sq)
    if not shots:
        raise InsufficientDataError("empty shot list")
    mz = np.array([r.mz_final for r in shots])
    mz_sq = np.array([r.mz_sq_final for r in shots])
    return circuit_stats_arrays(shots[0].backend, "expectation", L, p, t,
                                circuit_index, mz, mz_sq)


def _jackknife_se(loo: np.ndarray) -> float:
    n = len(loo)
    return float(np.sqrt((n - 1) / n * ((loo - loo.mean()) ** 2).sum()))


def _var_loo(x: np.ndarray) -> np.ndarray:
    """Delete-one unbiased variances of x, vectorized; nan below 3 points."""
    n = len(x)
    if n < 3:
        return np.full(n, np.nan)
    s = x.sum()
    s2 = (x * x).sum()
    return (s2 - x * x - (s - x) ** 2 / (n - 1)) / (n - 2)


def ensemble_stats(stats: list[CircuitStats]) -> EnsembleStats:
    """Aggregate CircuitStats rows sharing one (backend, mode, L, p, t).

    Jackknife standard errors need three circuits; with exactly two the
    point estimates are still produced and the SE fields come back nan.
    """
    if len(stats) < 2:
        raise InsufficientDataError("need at least 2 circuits")
    head = stats[0]
    for s in stats[1:]:
        if (s.backend, s.mode, s.L, s.p, s.t, s.n_shots) != \
           (head.backend, head.mode, head.L, head.p, head.t, head.n_shots):
            raise ParameterError("mixed ensembles in ensemble_stats")
    C = len(stats)
    m = np.array([s.mz_mean for s in stats])
    qv = np.array([s.quantum_var for s in stats])
    sv = np.array([s.mz_shot_var for s in stats])
    jk = np.array([s.quantum_var_sampling_var for s in stats])
    n = head.n_shots

    mz_bar = float(m.mean())
    mz_bar_se = float(m.std(ddof=1) / np.sqrt(C))
    var_q = float(qv.var(ddof=1))
    var_q_se = _jackknife_se(_var_loo(qv))
    var_q_debiased = var_q - float(np.nanmean(jk)) if np.any(np.isfinite(jk)) \
        else float("nan")

    # circuit-fluctuation term: over-circuit variance of the trajectory mean,
    # minus the shot noise it inherits from finite n
    shot_noise = sv / n if n > 0 else np.zeros(C)
    var_circuit = float(m.var(ddof=1) - shot_noise.mean())
    vc_loo = _var_loo(m) - (shot_noise.sum() - shot_noise) / (C - 1)
    var_circuit_se = _jackknife_se(vc_loo)

    zero_frac = float(np.mean(np.abs(qv) <= ZERO_TOL))
    return EnsembleStats(backend=head.backend, mode=head.mode, L=head.L,
                         p=head.p, t=head.t, mz_bar=mz_bar,
                         mz_bar_se=mz_bar_se, var_q=var_q, var_q_se=var_q_se,
                         var_circuit=var_circuit, n_circuits=C, n_shots=n,
                         var_q_debiased=var_q_debiased,
                         var_circuit_se=var_circuit_se, zero_frac=zero_frac)


def series_circuit_moments(s1: np.ndarray, s2: np.ndarray, L: int,
                           n_shots: int):
    """Per-step (mz_mean, quantum_var) of one circuit from the integer
    set-bit accumulators (sum and sum of squares over shots)."""
    mean_ones = s1 / n_shots
    mz_mean = (L - 2.0 * mean_ones) / L
    var_ones = (s2 / n_shots - mean_ones ** 2) * n_shots / (n_shots - 1)
    qv = 4.0 * var_ones / (L * L)
    return mz_mean, qv


def ensemble_series_stats(series: list[tuple[np.ndarray, np.ndarray]], L: int,
                          n_shots: int) -> dict[str, np.ndarray]:
    """Across-circuit statistics of per-step series, vectorized over steps.

    series holds one (s1, s2) integer accumulator pair per circuit. The
    jackknife-debias of var_q needs per-shot fourth moments that the
    accumulators do not carry, so series rows report var_q_debiased = nan.
    """
    if len(series) < 2:
        raise InsufficientDataError("need at least 2 circuits")
    C = len(series)
    m_rows = []
    qv_rows = []
    for s1, s2 in series:
        mz_mean, qv = series_circuit_moments(s1, s2, L, n_shots)
        m_rows.append(mz_mean)
        qv_rows.append(qv)
    m = np.vstack(m_rows)     # (C, t+1)
    qv = np.vstack(qv_rows)

    mz_bar = m.mean(axis=0)
    mz_bar_se = m.std(axis=0, ddof=1) / np.sqrt(C)
    var_q = qv.var(axis=0, ddof=1)

    # vectorized delete-one-circuit jackknife of var_q per step
    if C >= 3:
        s = qv.sum(axis=0)
        s2 = (qv * qv).sum(axis=0)
        loo = (s2 - qv * qv - (s - qv) ** 2 / (C - 1)) / (C - 2)
        var_q_se = np.sqrt(
            (C - 1) / C * ((loo - loo.mean(axis=0)) ** 2).sum(axis=0))
    else:
        var_q_se = np.full(m.shape[1], np.nan)

    shot_noise = qv / n_shots  # bitstring semantics: mz_shot_var == qv
    var_circuit = m.var(axis=0, ddof=1) - shot_noise.mean(axis=0)
    zero_frac = (np.abs(qv) <= ZERO_TOL).mean(axis=0)
    return {"mz_bar": mz_bar, "mz_bar_se": mz_bar_se, "var_q": var_q,
            "var_q_se": var_q_se, "var_circuit": var_circuit,
            "zero_frac": zero_frac}


def decomposition_components(values: np.ndarray):
    """(total, between, within) population variance components of a (C, n)
    shot matrix. total == between + within exactly, any data."""
    values = np.asarray(values, dtype=np.float64)
    grand = values.mean()
    total = float(((values - grand) ** 2).mean())
    m_c = values.mean(axis=1)
    between = float(((m_c - grand) ** 2).mean())
    within = float(values.var(axis=1).mean())
    return total, between, within
