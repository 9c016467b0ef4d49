"""Pure numpy implementation of the hot kernels.

This is the fallback used when the compiled extension is unavailable
(CIPT_KERNELS=pure also forces it). The compiled module _core.pyx implements
the same functions with the same signatures; both consume identical
counter-based random streams (see rngcore), so sampled bits and words, and
every integer accumulator, are bit-identical between the two implementations.
Statevector amplitudes agree only to float rounding because the reduction
order differs.

All kernels take primitive arguments (numpy arrays, ints, floats) and no
package types. Shot/bit kernels return integer accumulators; converting them
to physical observables is driver code shared by both implementations.
"""

from __future__ import annotations

import numpy as np

from ..rngcore import (
    INIT_STEP,
    draw_bits_shots,
    draw_u01_shots,
    draw_u64_shots,
)

IMPL = "pure"


def _initial_bits(n_shots, L, key, init_bits):
    """(n_shots, L) uint8 bit table: fixed pattern or per-shot uniform."""
    if init_bits is not None:
        return np.tile(np.asarray(init_bits, dtype=np.uint8), (n_shots, 1))
    shots = np.arange(n_shots, dtype=np.uint64)
    bits = np.empty((n_shots, L), dtype=np.uint8)
    for site in range(L):
        bits[:, site] = draw_bits_shots(key, INIT_STEP, shots, site)
    return bits


def statmech1_batch(kinds, sites_a, sites_b, L, n_shots, key, p_e1,
                    init_bits=None, record_series=False):
    """Evolve n_shots independent bit-strings through one sampled circuit.

    kinds[k] == 1 marks a Control step at sites_a[k] (bit forced to 0, then
    with probability p_e1 replaced by a uniform bit). Other steps scramble
    sites_a[k] and, when sites_b[k] >= 0, sites_b[k] to fresh uniform bits.

    Returns (final_ones, s1, s2): per-shot final set-bit counts, and when
    record_series is true the per-step sums over shots of the set-bit count
    and its square (length t+1, index 0 = initial state). Integer exact.
    """
    t = len(kinds)
    shots = np.arange(n_shots, dtype=np.uint64)
    bits = _initial_bits(n_shots, L, key, init_bits)
    ones = bits.sum(axis=1, dtype=np.int64)
    if record_series:
        s1 = np.zeros(t + 1, dtype=np.int64)
        s2 = np.zeros(t + 1, dtype=np.int64)
        s1[0] = ones.sum()
        s2[0] = np.square(ones).sum()
    else:
        s1 = s2 = None

    for k in range(t):
        a = sites_a[k]
        if kinds[k] == 1:
            new = np.zeros(n_shots, dtype=np.uint8)
            if p_e1 > 0.0:
                u = draw_u01_shots(key, k, shots, 0)
                repl = u < p_e1
                if repl.any():
                    rb = draw_bits_shots(key, k, shots, 1)
                    new = np.where(repl, rb, new)
            ones += new.astype(np.int64) - bits[:, a].astype(np.int64)
            bits[:, a] = new
        else:
            new_a = draw_bits_shots(key, k, shots, 0)
            ones += new_a.astype(np.int64) - bits[:, a].astype(np.int64)
            bits[:, a] = new_a
            b = sites_b[k]
            if b >= 0:
                new_b = draw_bits_shots(key, k, shots, 1)
                ones += new_b.astype(np.int64) - bits[:, b].astype(np.int64)
                bits[:, b] = new_b
        if record_series:
            s1[k + 1] = ones.sum()
            s2[k + 1] = np.square(ones).sum()

    return ones, s1, s2


def dephasing_batch(kinds, sites_a, sites_b, cum, L, n_shots, key,
                    init_bits=None, record_series=False):
    """Markov-chain evolution of n_shots bit-strings.

    cum[k] is a 4x4 table of cumulative transition probabilities for step k
    (row = source pair state 2*b_a + b_b); for single-site steps only
    cum[k, b, 0] is used (threshold for staying/going to bit 0). Control
    steps ignore cum and force the bit to 0. Returns as statmech1_batch.
    """
    t = len(kinds)
    shots = np.arange(n_shots, dtype=np.uint64)
    bits = _initial_bits(n_shots, L, key, init_bits)
    ones = bits.sum(axis=1, dtype=np.int64)
    if record_series:
        s1 = np.zeros(t + 1, dtype=np.int64)
        s2 = np.zeros(t + 1, dtype=np.int64)
        s1[0] = ones.sum()
        s2[0] = np.square(ones).sum()
    else:
        s1 = s2 = None

    for k in range(t):
        a = sites_a[k]
        if kinds[k] == 1:
            ones -= bits[:, a].astype(np.int64)
            bits[:, a] = 0
        else:
            u = draw_u01_shots(key, k, shots, 0)
            b = sites_b[k]
            if b >= 0:
                cur = (bits[:, a].astype(np.intp) << 1) | bits[:, b]
                thr = cum[k][cur, :3]  # (n_shots, 3)
                nxt = np.minimum((u[:, None] >= thr).sum(axis=1), 3)
                new_a = ((nxt >> 1) & 1).astype(np.uint8)
                new_b = (nxt & 1).astype(np.uint8)
                ones += new_a.astype(np.int64) - bits[:, a].astype(np.int64)
                ones += new_b.astype(np.int64) - bits[:, b].astype(np.int64)
                bits[:, a] = new_a
                bits[:, b] = new_b
            else:
                cur = bits[:, a].astype(np.intp)
                thr = cum[k][cur, 0]
                new_a = (u >= thr).astype(np.uint8)
                ones += new_a.astype(np.int64) - bits[:, a].astype(np.int64)
                bits[:, a] = new_a
        if record_series:
            s1[k + 1] = ones.sum()
            s2[k + 1] = np.square(ones).sum()

    return ones, s1, s2


def statmech2_batch(kinds, sites_a, sites_b, L, n_traj, key,
                    logw_pair, prob_ii, logw_ctrl):
    """Sample n_traj word trajectories of the two-replica model.

    Words per site: 0 = P, 1 = I, 2 = S, all trajectories start all-P.
    Chaotic steps look up the source pair index 3*w_a + w_b: the log-weight
    increment logw_pair[idx] is added and both sites are set to I with
    probability prob_ii[idx], else to S. Control steps add logw_ctrl[w] and
    force the word to P. Log-weight increments are table lookups, added in
    step order, so results are bit-identical to the compiled kernel.

    Returns (logw float64[n_traj], n_nonp int32[n_traj]).
    """
    t = len(kinds)
    traj = np.arange(n_traj, dtype=np.uint64)
    words = np.zeros((n_traj, L), dtype=np.uint8)
    logw = np.zeros(n_traj, dtype=np.float64)

    for k in range(t):
        a = sites_a[k]
        if kinds[k] == 1:
            w = words[:, a]
            logw += logw_ctrl[w]
            words[:, a] = 0
        else:
            b = sites_b[k]
            idx = 3 * words[:, a].astype(np.intp) + words[:, b]
            logw += logw_pair[idx]
            u = draw_u01_shots(key, k, traj, 0)
            new = np.where(u < prob_ii[idx], 1, 2).astype(np.uint8)
            words[:, a] = new
            words[:, b] = new

    n_nonp = (words != 0).sum(axis=1).astype(np.int32)
    return logw, n_nonp


# -- statevector ops ---------------------------------------------------------
# Basis convention: site 0 is the most significant bit of the amplitude index.

def sv_apply2(state, L, q0, q1, gate):
    """Apply a 4x4 unitary to sites (q0, q1) in place; q0 is the first
    tensor factor of the gate."""
    psi = state.reshape([2] * L)
    out = np.tensordot(gate.reshape(2, 2, 2, 2), psi, axes=([2, 3], [q0, q1]))
    out = np.moveaxis(out, [0, 1], [q0, q1])
    state[:] = out.reshape(-1)


def sv_apply1(state, L, q, gate):
    """Apply a 2x2 unitary to site q in place."""
    psi = state.reshape([2] * L)
    out = np.tensordot(gate, psi, axes=([1], [q]))
    out = np.moveaxis(out, 0, q)
    state[:] = out.reshape(-1)


def sv_measure_reset(state, L, q, u):
    """Projective Z measurement at site q followed by X iff outcome is 1.

    u is the uniform variate deciding the outcome. The state is projected,
    renormalized and bit-flipped in place; site q ends in |0>. Returns
    (outcome, norm) with norm the pre-measurement squared norm (integrity
    check hook for the caller).
    """
    psi = np.moveaxis(state.reshape([2] * L), q, 0)
    p0 = float(np.sum(psi[0].real ** 2 + psi[0].imag ** 2))
    p1 = float(np.sum(psi[1].real ** 2 + psi[1].imag ** 2))
    norm = p0 + p1
    if u < p0:
        outcome = 0
        psi[1] = 0.0
        state *= 1.0 / np.sqrt(p0)
    else:
        outcome = 1
        psi[0] = 0.0
        state *= 1.0 / np.sqrt(p1)
        tmp = psi[0].copy()
        psi[0] = psi[1]
        psi[1] = tmp
    return outcome, norm


def sv_ones_moments(state, pc):
    """First two probability-weighted moments of the set-bit count.

    pc is the float64 popcount table for the full basis. Returns (m1, m2).
    """
    prob = state.real ** 2 + state.imag ** 2
    m1 = float(prob @ pc)
    m2 = float(prob @ (pc * pc))
    return m1, m2


def sv_sample_index(state, u):
    """Sample a basis index from |state|^2 using the uniform variate u."""
    prob = state.real ** 2 + state.imag ** 2
    c = np.cumsum(prob)
    idx = int(np.searchsorted(c, u, side="right"))
    return min(idx, len(state) - 1)


def sv_run_trajectory(state, L, kinds, sites_a, sites_b, gate_idx, gates,
                      ctrl_u, pc, outcomes, mz1=None, mz2=None):
    """One full shot: apply all steps to `state` in place.

    gates is a (G, 4, 4) stack; single-site gates live in the top-left 2x2
    block of their slot and are flagged by sites_b[k] < 0. ctrl_u holds one
    uniform per Control step, indexed by control ordinal. outcomes[k]
    receives the measurement record (+1/-1, 0 at chaotic steps). Optional
    mz1/mz2 (length t+1) receive the set-bit moment series. Returns the
    worst |norm - 1| seen at measurements.
    """
    t = len(kinds)
    worst = 0.0
    n_ctrl = 0
    if mz1 is not None:
        m1, m2 = sv_ones_moments(state, pc)
        mz1[0] = m1
        mz2[0] = m2
    for k in range(t):
        a = sites_a[k]
        if kinds[k] == 1:
            outcome, norm = sv_measure_reset(state, L, a, ctrl_u[n_ctrl])
            n_ctrl += 1
            outcomes[k] = 1 if outcome == 0 else -1
            drift = abs(norm - 1.0)
            if drift > worst:
                worst = drift
        else:
            g = gates[gate_idx[k]]
            b = sites_b[k]
            if b >= 0:
                sv_apply2(state, L, a, b, g)
            else:
                sv_apply1(state, L, a, np.ascontiguousarray(g[:2, :2]))
            outcomes[k] = 0
        if mz1 is not None:
            m1, m2 = sv_ones_moments(state, pc)
            mz1[k + 1] = m1
            mz2[k + 1] = m2
    return worst
