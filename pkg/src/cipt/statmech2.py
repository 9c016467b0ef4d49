"""Two-replica word model for the collision probability.

The Haar average of the doubled dynamics rho^(x)2 closes on a per-site word
algebra with three states per site: P (projector onto the doubled reset
state), I (doubled identity), S (replica swap). A chaotic gate twirls the
word pair on its two sites into the invariant pair (I, I) or (S, S); a
Control resets the site's word to P. The collision probability of a circuit
is the weighted average CP = E[w * prod_i f(w_i)] over sampled word
trajectories with f(P) = 1, f(I) = f(S) = 2.

Twirl coefficients: with per-word trace factors t = (P:1, I:4, S:2) and
swap-contracted factors s = (P:1, I:2, S:4), a source pair (w, w') with
T = t(w) t(w') and sigma = s(w) s(w') maps to

    c_I = (T - sigma/4) / 15,    c_S = (sigma - T/4) / 15,

the trajectory branches to (I, I) with probability c_I / (c_I + c_S) and the
weight picks up the factor (c_I + c_S). On reset the weight factor is the
trace of the doubled reset channel output: 1, 4, 2 for P, I, S; net of the
f-product change these contribute 1, 2, 1 to the estimator. Both twirl
coefficients are non-negative for every word pair, so no sign tracking
survives to the estimator; this is asserted at import.

Only the exact-Haar gate ensemble averages to this model; the approximate
ensemble is not a 2-design and has no closed word dynamics (its collision
probabilities are measured on the statevector backend instead). Periodic
chains only: the word update is defined on site pairs.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .circuit import CircuitParams, sample_circuit
from .errors import ConvergenceWarning, ParameterError
from .rngcore import derive_key

TAG_SM2 = 5

WORD_P, WORD_I, WORD_S = 0, 1, 2

_TRACE_FACTOR = (1.0, 4.0, 2.0)   # t(P), t(I), t(S)
_SWAP_FACTOR = (1.0, 2.0, 4.0)    # s(P), s(I), s(S)

#: weight factor of a Control per source word (P, I, S)
CONTROL_WEIGHT = (1.0, 4.0, 2.0)

LN2 = math.log(2.0)


def twirl_coefficients(wa: int, wb: int) -> tuple[float, float]:
    """(c_I, c_S) for the chaotic twirl of the source pair (wa, wb)."""
    T = _TRACE_FACTOR[wa] * _TRACE_FACTOR[wb]
    s = _SWAP_FACTOR[wa] * _SWAP_FACTOR[wb]
    return (T - s / 4.0) / 15.0, (s - T / 4.0) / 15.0


def _build_tables():
    logw_pair = np.empty(9)
    prob_ii = np.empty(9)
    for wa in range(3):
        for wb in range(3):
            c_i, c_s = twirl_coefficients(wa, wb)
            assert c_i >= -1e-15 and c_s >= -1e-15, \
                f"negative twirl coefficient for pair ({wa},{wb})"
            c_i = max(c_i, 0.0)
            c_s = max(c_s, 0.0)
            tot = c_i + c_s
            idx = 3 * wa + wb
            logw_pair[idx] = math.log(tot)
            prob_ii[idx] = c_i / tot
    logw_ctrl = np.array([math.log(w) for w in CONTROL_WEIGHT])
    return logw_pair, prob_ii, logw_ctrl


LOGW_PAIR, PROB_II, LOGW_CTRL = _build_tables()


def _log_mean_exp(x: np.ndarray) -> float:
    m = float(np.max(x))
    return m + math.log(float(np.mean(np.exp(x - m))))


@dataclass
class CollisionEstimate:
    """Monte Carlo estimate of E_C[sum_x p_x^2] at the circuit's final step."""

    L: int
    p: float
    t: int
    cp_mean: float
    cp_stderr: float
    n_circuits: int
    n_words: int


def circuit_log_estimates(c, n_words: int) -> np.ndarray:
    """Per-trajectory log estimator values log(w) + n_nonP * log 2 for one
    sampled circuit."""
    if c.params.ensemble != "exact_haar":
        raise ParameterError("the two-replica model only averages the "
                             "exact_haar ensemble")
    if c.params.boundary != "periodic":
        raise ParameterError("the two-replica model needs periodic boundaries")
    kinds, sites_a, sites_b = c.step_arrays
    key = derive_key(c.params.master_seed, TAG_SM2, c.circuit_index)
    logw, n_nonp = K.statmech2_batch(kinds, sites_a, sites_b, c.params.L,
                                     n_words, key, LOGW_PAIR, PROB_II, LOGW_CTRL)
    return logw + n_nonp * LN2


def estimate_collision_probability(params: CircuitParams, n_circuits: int,
                                   n_words: int, rel_tol: float | None = None
                                   ) -> CollisionEstimate:
    """Average the word-trajectory estimator over circuits.

    The mean is accumulated in log space (deep circuits at small p have
    exponentially small CP), the stderr comes from batch means with one
    batch per circuit (trajectory batches when n_circuits == 1). A relative
    stderr above rel_tol raises ConvergenceWarning but still returns.
    """
    if n_circuits < 1 or n_words < 2:
        raise ParameterError("need n_circuits >= 1 and n_words >= 2")
    per_circuit = []
    for ci in range(n_circuits):
        c = sample_circuit(params, ci)
        logx = circuit_log_estimates(c, n_words)
        per_circuit.append(math.exp(_log_mean_exp(logx)))
    means = np.asarray(per_circuit)

    if n_circuits > 1:
        cp = float(means.mean())
        stderr = float(means.std(ddof=1) / math.sqrt(n_circuits))
    else:
        c = sample_circuit(params, 0)
        logx = circuit_log_estimates(c, n_words)
        n_batches = min(10, n_words)
        batches = [math.exp(_log_mean_exp(b))
                   for b in np.array_split(logx, n_batches)]
        batches = np.asarray(batches)
        cp = float(means[0])
        stderr = float(batches.std(ddof=1) / math.sqrt(n_batches))

    if rel_tol is not None and cp > 0 and stderr / cp > rel_tol:
        warnings.warn(f"collision probability stderr {stderr:.2e} exceeds "
                      f"{rel_tol:.1%} of the mean {cp:.3e}", ConvergenceWarning)
    return CollisionEstimate(L=params.L, p=params.p, t=params.t_max,
                             cp_mean=cp, cp_stderr=stderr,
                             n_circuits=n_circuits, n_words=n_words)
