"""Standalone diagnostics: gate-ensemble frame potential and the Lyapunov
exponent of the underlying chaotic/contractive competition.

The frame potential F_k = E_{U,V} |tr(U' V)|^(2k) (prime denoting the
conjugate transpose) measures how close a gate ensemble sits to a unitary
k-design: the Haar value is k! for qudits of enough dimension, so F_1 = 1
and F_2 = 2 on two qubits. The single-layer gate set used by the chaotic
step is not an exact 2-design and lands near 2.14.

The Lyapunov probe mirrors the circuit's classical limit: a doubling map in
stochastic competition with a halving map, applied to a pair of nearby
points sharing one map sequence. Arithmetic is fixed point on
precision_bits-bit integers, so doubling is exact and halving loses at most
one ulp; the separation is only scored while it sits well inside the
representable range (at least 2^16 from either end), and the pair is
re-centered to mid-range whenever it drifts out. Each valid step
contributes log(delta_after / delta_before); the mean rate is log(2) times
(1 - 2p) in expectation.
"""

from __future__ import annotations

import math

import numpy as np

from ..circuit import approx_haar_gate, haar_unitary
from ..errors import EstimationError, ParameterError

FRAME_ENSEMBLES = ("approx_haar_cz", "exact_haar")
_GUARD_BITS = 16


def frame_potential(ensemble: str, k: int = 2, n_pairs: int = 100_000,
                    seed: int = 0, batch_size: int = 2048):
    """Monte Carlo (F_k estimate, stderr) over independent gate pairs."""
    if ensemble not in FRAME_ENSEMBLES:
        raise ParameterError(f"unknown ensemble {ensemble!r}")
    if k < 1:
        raise ParameterError("k must be a positive integer")
    if n_pairs < 1000:
        raise ParameterError("need at least 1000 pairs")
    rng = np.random.default_rng(seed)

    def draw(count):
        if ensemble == "exact_haar":
            return np.stack([haar_unitary(rng, 4) for _ in range(count)])
        angles = rng.uniform(0.0, 2.0 * math.pi, size=(count, 12))
        return np.stack([approx_haar_gate(a, cz_present=True) for a in angles])

    values = np.empty(n_pairs)
    done = 0
    while done < n_pairs:
        b = min(batch_size, n_pairs - done)
        u = draw(b)
        v = draw(b)
        tr = np.einsum("bij,bij->b", u.conj(), v)
        values[done:done + b] = np.abs(tr) ** (2 * k)
        done += b
    est = float(values.mean())
    stderr = float(values.std(ddof=1) / math.sqrt(n_pairs))
    return est, stderr


def lyapunov_estimate(p: float, n_steps: int = 4000,
                      n_trajectories: int = 64, precision_bits: int = 128,
                      seed: int = 0):
    """(lambda, stderr) of the doubling/halving competition at control rate p.

    lambda is in nats per step; the prediction is log(2) * (1 - 2p).
    """
    if not 0.0 <= p <= 1.0:
        raise ParameterError("p must lie in [0, 1]")
    if precision_bits < 4 * _GUARD_BITS:
        raise ParameterError(f"precision_bits must be >= {4 * _GUARD_BITS}")
    if n_steps < 1 or n_trajectories < 2:
        raise ParameterError("need n_steps >= 1 and n_trajectories >= 2")

    modulus = 1 << precision_bits
    delta0 = 1 << (precision_bits // 2)
    lo_bound = 1 << _GUARD_BITS
    hi_bound = 1 << (precision_bits - _GUARD_BITS)
    rng = np.random.default_rng(seed)

    def separation(a, b):
        d = (b - a) % modulus
        return min(d, modulus - d)

    rates = []
    for _ in range(n_trajectories):
        a = int.from_bytes(rng.bytes(precision_bits // 8), "little") % modulus
        b = (a + delta0) % modulus
        controls = rng.random(n_steps) < p
        total = 0.0
        count = 0
        for is_control in controls:
            d_before = separation(a, b)
            if not lo_bound <= d_before <= hi_bound:
                b = (a + delta0) % modulus  # re-center off-window pairs
                d_before = delta0
            if is_control:
                a >>= 1
                b >>= 1
            else:
                a = (a << 1) % modulus
                b = (b << 1) % modulus
            d_after = separation(a, b)
            if lo_bound <= d_after <= hi_bound:
                total += math.log(d_after) - math.log(d_before)
                count += 1
        if count > 0:
            rates.append(total / count)
    if len(rates) < 2:
        raise EstimationError("too few trajectories with valid windows")
    lam = float(np.mean(rates))
    stderr = float(np.std(rates, ddof=1) / math.sqrt(len(rates)))
    return lam, stderr
