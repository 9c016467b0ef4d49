"""Classical surrogate backends.

Three dynamics that share the sampled circuit's walk skeleton:

* ``dephasing``: keep only diagonal density-matrix weight. Each chaotic gate
  becomes the doubly stochastic transition table |U_ij|^2 on the two-bit
  block, controls force the measured bit to 0. One shot is one Markov
  trajectory of a classical bit-string.
* ``statmech1``: the first-moment reduction of the gate-averaged dynamics.
  Chaotic steps replace the touched bits by fresh uniform bits, controls
  force 0. Optional depolarizing noise: with probability p_e1 a just-reset
  bit is replaced by a uniform bit. p_e2 (two-site depolarizing after a
  chaotic step) is accepted for interface parity but has no observable
  effect here: the chaotic update already leaves both marginals uniform,
  and depolarizing noise fixes the uniform state.
* ``statmech1_exact``: deterministic per-site marginal tracker for the same
  first-moment dynamics; gives E[Mz] and the trajectory variance of Mz in
  closed form because the bit distribution stays a product measure.

Shot randomness comes from counter-based streams keyed by
(master_seed, stream tag, circuit_index), identical for the compiled and
pure kernels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .circuit import CircuitRealization, CONTROL
from .errors import NumericalIntegrityError, ParameterError
from .rngcore import derive_key
from .statevector import ShotBatch

TAG_SM1 = 3
TAG_DEPH = 4

_ROW_SUM_TOL = 1e-9


@dataclass(frozen=True)
class NoiseParams:
    """Depolarizing error rates: p_e1 after a Control, p_e2 after a Chaotic."""

    p_e1: float = 0.0
    p_e2: float = 0.0

    def __post_init__(self):
        for name in ("p_e1", "p_e2"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ParameterError(f"{name} must be in [0, 1], got {v}")


def _resolve_init_bits(L: int, init_bits):
    if init_bits is None:
        return None
    bits = np.asarray(init_bits, dtype=np.uint8)
    if bits.shape != (L,) or bits.max(initial=0) > 1:
        raise ParameterError("initial bits must be a length-L 0/1 array")
    return bits


def ones_to_mz(final_ones: np.ndarray, L: int) -> np.ndarray:
    """Per-shot Mz from set-bit counts."""
    return (L - 2.0 * final_ones.astype(np.float64)) / L


def dephasing_tables(c: CircuitRealization) -> np.ndarray:
    """Cumulative transition tables, one 4x4 row-cumulative block per step.

    Row s of block k is the outcome distribution of source pair state s
    (2*b_a + b_b); single-site steps use the top-left 2x2 corner. Every
    source row must sum to 1 within 1e-9 or the gate is rejected.
    """
    t = c.t_max
    cum = np.zeros((t, 4, 4))
    for k in range(t):
        if c.kinds[k] == CONTROL:
            continue
        u = c.gate_matrix(k)
        trans = (u.real ** 2 + u.imag ** 2).T  # row = source state
        sums = trans.sum(axis=1)
        if np.max(np.abs(sums - 1.0)) > _ROW_SUM_TOL:
            raise NumericalIntegrityError(
                f"step {k}: transition rows sum to {sums}, expected 1 within "
                f"{_ROW_SUM_TOL}")
        d = trans.shape[0]
        cum[k, :d, :d] = np.cumsum(trans, axis=1)
    return cum


def dephasing_run_batch(c: CircuitRealization, n_shots: int, init_bits=None,
                        record_series: bool = False):
    """n_shots dephasing trajectories of circuit c.

    Returns (batch, final_ones, s1, s2): per-shot Mz data plus the raw
    integer set-bit count accumulators (series arrays only when requested).
    Initial bits default to per-shot uniform.
    """
    L = c.params.L
    kinds, sites_a, sites_b = c.step_arrays
    cum = dephasing_tables(c)
    key = derive_key(c.params.master_seed, TAG_DEPH, c.circuit_index)
    final_ones, s1, s2 = K.dephasing_batch(
        kinds, sites_a, sites_b, cum, L, n_shots, key,
        init_bits=_resolve_init_bits(L, init_bits), record_series=record_series)
    mz = ones_to_mz(final_ones, L)
    batch = ShotBatch(backend="dephasing", mode="bitstring", mz=mz, mz_sq=mz * mz)
    return batch, final_ones, s1, s2


def statmech1_run_batch(c: CircuitRealization, n_shots: int,
                        noise: NoiseParams | None = None, init_bits=None,
                        record_series: bool = False):
    """n_shots first-moment sampler trajectories of circuit c.

    Returns (batch, final_ones, s1, s2) as dephasing_run_batch.
    """
    noise = noise or NoiseParams()
    L = c.params.L
    kinds, sites_a, sites_b = c.step_arrays
    key = derive_key(c.params.master_seed, TAG_SM1, c.circuit_index)
    final_ones, s1, s2 = K.statmech1_batch(
        kinds, sites_a, sites_b, L, n_shots, key, noise.p_e1,
        init_bits=_resolve_init_bits(L, init_bits), record_series=record_series)
    mz = ones_to_mz(final_ones, L)
    batch = ShotBatch(backend="statmech1", mode="bitstring", mz=mz, mz_sq=mz * mz)
    return batch, final_ones, s1, s2


@dataclass
class ExactStats:
    """Closed-form first-moment observables for one circuit."""

    mz: float
    quantum_var: float
    mz_series: np.ndarray | None = None
    quantum_var_series: np.ndarray | None = None


def statmech1_exact(c: CircuitRealization, noise: NoiseParams | None = None,
                    init_bits=None, record_series: bool = False) -> ExactStats:
    """Deterministic marginal tracker for the first-moment dynamics.

    Tracks q_i = P(bit_i = 1); the dynamics preserves the product form, so
    E[Mz] = mean(1 - 2 q) and the trajectory variance of Mz is
    (4/L^2) sum q(1-q) exactly. Noiseless values stay in {0, 1/2}; with
    p_e1 > 0 a controlled site carries q = p_e1 / 2.
    """
    noise = noise or NoiseParams()
    L = c.params.L
    init = _resolve_init_bits(L, init_bits)
    q = np.full(L, 0.5) if init is None else init.astype(np.float64)
    kinds, sites_a, sites_b = c.step_arrays
    t = c.t_max
    if record_series:
        mz_series = np.empty(t + 1)
        qv_series = np.empty(t + 1)
        mz_series[0] = np.mean(1.0 - 2.0 * q)
        qv_series[0] = 4.0 * np.sum(q * (1.0 - q)) / (L * L)
    else:
        mz_series = qv_series = None

    for k in range(t):
        a = sites_a[k]
        if kinds[k] == 1:
            q[a] = noise.p_e1 / 2.0
        else:
            q[a] = 0.5
            b = sites_b[k]
            if b >= 0:
                q[b] = 0.5
            # p_e2 depolarizing after the chaotic step: q stays 1/2
        if record_series:
            mz_series[k + 1] = np.mean(1.0 - 2.0 * q)
            qv_series[k + 1] = 4.0 * np.sum(q * (1.0 - q)) / (L * L)

    mz = float(np.mean(1.0 - 2.0 * q))
    qv = float(4.0 * np.sum(q * (1.0 - q)) / (L * L))
    return ExactStats(mz=mz, quantum_var=qv, mz_series=mz_series,
                      quantum_var_series=qv_series)


def statmech1_cp_prediction(c: CircuitRealization) -> float:
    """First-moment collision probability 2^-(L - |A|).

    A is the set of sites whose last touch was a Control; all sites start in
    A (the initial state of the word picture is fully controlled, CP = 1).
    This is the first-moment approximation: it misses the factor-2 Haar
    enhancement 2/(2^L+1) of the fully chaotic phase that the two-replica
    model reproduces.
    """
    in_a = np.ones(c.params.L, dtype=bool)
    kinds, sites_a, sites_b = c.step_arrays
    for k in range(c.t_max):
        a = sites_a[k]
        if kinds[k] == 1:
            in_a[a] = True
        else:
            in_a[a] = False
            b = sites_b[k]
            if b >= 0:
                in_a[b] = False
    return float(2.0 ** -(c.params.L - int(in_a.sum())))
