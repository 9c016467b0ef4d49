# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementation of the hot kernels. Mirrors _pure.py exactly:
same counter-based random streams, same integer accumulators. See the
module docstring of _pure.py for the contract."""

import numpy as np

from libc.stdint cimport uint64_t, int64_t, int32_t, uint8_t
from libc.math cimport sqrt, fabs

IMPL = "compiled"

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef uint64_t STEP_MULT = 0xD1B54A32D192ED03ULL
cdef uint64_t INIT_STEP = 0xFFFFFFFFULL
cdef double INV53 = 1.0 / 9007199254740992.0


cdef inline uint64_t mix64(uint64_t x) nogil:
    x ^= x >> 30
    x *= 0xBF58476D1CE4E5B9ULL
    x ^= x >> 27
    x *= 0x94D049BB133111EBULL
    x ^= x >> 31
    return x


cdef inline uint64_t draw_u64(uint64_t key, uint64_t step, uint64_t shot,
                              uint64_t slot) nogil:
    cdef uint64_t a = mix64(key ^ (step * STEP_MULT))
    return mix64(a ^ (shot * GOLDEN + slot))


cdef inline double draw_u01(uint64_t key, uint64_t step, uint64_t shot,
                            uint64_t slot) nogil:
    return <double>(draw_u64(key, step, shot, slot) >> 11) * INV53


cdef inline uint8_t draw_bit(uint64_t key, uint64_t step, uint64_t shot,
                             uint64_t slot) nogil:
    return <uint8_t>(draw_u64(key, step, shot, slot) >> 63)


def statmech1_batch(const uint8_t[::1] kinds, const int32_t[::1] sites_a,
                    const int32_t[::1] sites_b, int L, int n_shots,
                    uint64_t key, double p_e1, init_bits=None,
                    bint record_series=False):
    cdef Py_ssize_t t = kinds.shape[0]
    final_ones_arr = np.empty(n_shots, dtype=np.int64)
    cdef int64_t[::1] final_ones = final_ones_arr
    s1_arr = s2_arr = None
    cdef int64_t[::1] s1 = None, s2 = None
    if record_series:
        s1_arr = np.zeros(t + 1, dtype=np.int64)
        s2_arr = np.zeros(t + 1, dtype=np.int64)
        s1 = s1_arr
        s2 = s2_arr

    cdef bint has_init = init_bits is not None
    cdef const uint8_t[::1] init = None
    if has_init:
        init = np.ascontiguousarray(init_bits, dtype=np.uint8)

    bits_arr = np.empty(L, dtype=np.uint8)
    cdef uint8_t[::1] bits = bits_arr
    cdef Py_ssize_t shot, k
    cdef int site, a, b
    cdef int64_t ones
    cdef uint8_t nb
    cdef double u

    with nogil:
        for shot in range(n_shots):
            ones = 0
            for site in range(L):
                if has_init:
                    bits[site] = init[site]
                else:
                    bits[site] = draw_bit(key, INIT_STEP, shot, site)
                ones += bits[site]
            if record_series:
                s1[0] += ones
                s2[0] += ones * ones
            for k in range(t):
                a = sites_a[k]
                if kinds[k] == 1:
                    nb = 0
                    if p_e1 > 0.0:
                        u = draw_u01(key, k, shot, 0)
                        if u < p_e1:
                            nb = draw_bit(key, k, shot, 1)
                    ones += <int64_t>nb - <int64_t>bits[a]
                    bits[a] = nb
                else:
                    nb = draw_bit(key, k, shot, 0)
                    ones += <int64_t>nb - <int64_t>bits[a]
                    bits[a] = nb
                    b = sites_b[k]
                    if b >= 0:
                        nb = draw_bit(key, k, shot, 1)
                        ones += <int64_t>nb - <int64_t>bits[b]
                        bits[b] = nb
                if record_series:
                    s1[k + 1] += ones
                    s2[k + 1] += ones * ones
            final_ones[shot] = ones

    return final_ones_arr, s1_arr, s2_arr


def dephasing_batch(const uint8_t[::1] kinds, const int32_t[::1] sites_a,
                    const int32_t[::1] sites_b, const double[:, :, ::1] cum,
                    int L, int n_shots, uint64_t key, init_bits=None,
                    bint record_series=False):
    cdef Py_ssize_t t = kinds.shape[0]
    final_ones_arr = np.empty(n_shots, dtype=np.int64)
    cdef int64_t[::1] final_ones = final_ones_arr
    s1_arr = s2_arr = None
    cdef int64_t[::1] s1 = None, s2 = None
    if record_series:
        s1_arr = np.zeros(t + 1, dtype=np.int64)
        s2_arr = np.zeros(t + 1, dtype=np.int64)
        s1 = s1_arr
        s2 = s2_arr

    cdef bint has_init = init_bits is not None
    cdef const uint8_t[::1] init = None
    if has_init:
        init = np.ascontiguousarray(init_bits, dtype=np.uint8)

    bits_arr = np.empty(L, dtype=np.uint8)
    cdef uint8_t[::1] bits = bits_arr
    cdef Py_ssize_t shot, k
    cdef int site, a, b, cur, nxt
    cdef int64_t ones
    cdef uint8_t nb_a, nb_b
    cdef double u

    with nogil:
        for shot in range(n_shots):
            ones = 0
            for site in range(L):
                if has_init:
                    bits[site] = init[site]
                else:
                    bits[site] = draw_bit(key, INIT_STEP, shot, site)
                ones += bits[site]
            if record_series:
                s1[0] += ones
                s2[0] += ones * ones
            for k in range(t):
                a = sites_a[k]
                if kinds[k] == 1:
                    ones -= <int64_t>bits[a]
                    bits[a] = 0
                else:
                    u = draw_u01(key, k, shot, 0)
                    b = sites_b[k]
                    if b >= 0:
                        cur = (<int>bits[a] << 1) | <int>bits[b]
                        nxt = 0
                        while nxt < 3 and u >= cum[k, cur, nxt]:
                            nxt += 1
                        nb_a = <uint8_t>((nxt >> 1) & 1)
                        nb_b = <uint8_t>(nxt & 1)
                        ones += <int64_t>nb_a - <int64_t>bits[a]
                        ones += <int64_t>nb_b - <int64_t>bits[b]
                        bits[a] = nb_a
                        bits[b] = nb_b
                    else:
                        cur = <int>bits[a]
                        nb_a = 1 if u >= cum[k, cur, 0] else 0
                        ones += <int64_t>nb_a - <int64_t>bits[a]
                        bits[a] = nb_a
                if record_series:
                    s1[k + 1] += ones
                    s2[k + 1] += ones * ones
            final_ones[shot] = ones

    return final_ones_arr, s1_arr, s2_arr


def statmech2_batch(const uint8_t[::1] kinds, const int32_t[::1] sites_a,
                    const int32_t[::1] sites_b, int L, int n_traj,
                    uint64_t key, const double[::1] logw_pair,
                    const double[::1] prob_ii, const double[::1] logw_ctrl):
    cdef Py_ssize_t t = kinds.shape[0]
    logw_arr = np.zeros(n_traj, dtype=np.float64)
    n_nonp_arr = np.empty(n_traj, dtype=np.int32)
    cdef double[::1] logw = logw_arr
    cdef int32_t[::1] n_nonp = n_nonp_arr
    words_arr = np.empty(L, dtype=np.uint8)
    cdef uint8_t[::1] words = words_arr

    cdef Py_ssize_t traj, k
    cdef int site, a, b, idx, cnt
    cdef double w, u
    cdef uint8_t new

    with nogil:
        for traj in range(n_traj):
            for site in range(L):
                words[site] = 0
            w = 0.0
            for k in range(t):
                a = sites_a[k]
                if kinds[k] == 1:
                    w += logw_ctrl[words[a]]
                    words[a] = 0
                else:
                    b = sites_b[k]
                    idx = 3 * <int>words[a] + <int>words[b]
                    w += logw_pair[idx]
                    u = draw_u01(key, k, traj, 0)
                    new = 1 if u < prob_ii[idx] else 2
                    words[a] = new
                    words[b] = new
            logw[traj] = w
            cnt = 0
            for site in range(L):
                if words[site] != 0:
                    cnt += 1
            n_nonp[traj] = cnt

    return logw_arr, n_nonp_arr


# -- statevector ops ---------------------------------------------------------
# Basis convention: site 0 is the most significant bit of the amplitude index.

def sv_apply2(double complex[::1] state, int L, int q0, int q1,
              const double complex[:, ::1] gate):
    cdef int s0 = L - 1 - q0
    cdef int s1 = L - 1 - q1
    cdef Py_ssize_t m0 = (<Py_ssize_t>1) << s0
    cdef Py_ssize_t m1 = (<Py_ssize_t>1) << s1
    cdef int lo = s0 if s0 < s1 else s1
    cdef int hi = s0 if s0 > s1 else s1
    cdef Py_ssize_t dim = (<Py_ssize_t>1) << L
    cdef Py_ssize_t low_mask = ((<Py_ssize_t>1) << lo) - 1
    cdef Py_ssize_t mid_mask = ((<Py_ssize_t>1) << (hi - lo - 1)) - 1
    cdef Py_ssize_t r, base, i0, i1, i2, i3
    cdef double complex a0, a1, a2, a3

    with nogil:
        for r in range(dim >> 2):
            base = ((r >> (hi - 1)) << (hi + 1)) \
                | (((r >> lo) & mid_mask) << (lo + 1)) \
                | (r & low_mask)
            i0 = base
            i1 = base | m1
            i2 = base | m0
            i3 = base | m0 | m1
            a0 = state[i0]
            a1 = state[i1]
            a2 = state[i2]
            a3 = state[i3]
            state[i0] = gate[0, 0] * a0 + gate[0, 1] * a1 + gate[0, 2] * a2 + gate[0, 3] * a3
            state[i1] = gate[1, 0] * a0 + gate[1, 1] * a1 + gate[1, 2] * a2 + gate[1, 3] * a3
            state[i2] = gate[2, 0] * a0 + gate[2, 1] * a1 + gate[2, 2] * a2 + gate[2, 3] * a3
            state[i3] = gate[3, 0] * a0 + gate[3, 1] * a1 + gate[3, 2] * a2 + gate[3, 3] * a3


def sv_apply1(double complex[::1] state, int L, int q,
              const double complex[:, ::1] gate):
    cdef int s = L - 1 - q
    cdef Py_ssize_t m = (<Py_ssize_t>1) << s
    cdef Py_ssize_t dim = (<Py_ssize_t>1) << L
    cdef Py_ssize_t low_mask = m - 1
    cdef Py_ssize_t r, base, i0, i1
    cdef double complex a0, a1

    with nogil:
        for r in range(dim >> 1):
            base = ((r >> s) << (s + 1)) | (r & low_mask)
            i0 = base
            i1 = base | m
            a0 = state[i0]
            a1 = state[i1]
            state[i0] = gate[0, 0] * a0 + gate[0, 1] * a1
            state[i1] = gate[1, 0] * a0 + gate[1, 1] * a1


def sv_measure_reset(double complex[::1] state, int L, int q, double u):
    cdef int s = L - 1 - q
    cdef Py_ssize_t m = (<Py_ssize_t>1) << s
    cdef Py_ssize_t dim = (<Py_ssize_t>1) << L
    cdef Py_ssize_t low_mask = m - 1
    cdef Py_ssize_t r, base, i0, i1
    cdef double p0 = 0.0, p1 = 0.0, inv
    cdef double complex a
    cdef int outcome

    with nogil:
        for r in range(dim >> 1):
            base = ((r >> s) << (s + 1)) | (r & low_mask)
            i0 = base
            i1 = base | m
            a = state[i0]
            p0 += a.real * a.real + a.imag * a.imag
            a = state[i1]
            p1 += a.real * a.real + a.imag * a.imag
        if u < p0:
            outcome = 0
            inv = 1.0 / sqrt(p0)
            for r in range(dim >> 1):
                base = ((r >> s) << (s + 1)) | (r & low_mask)
                state[base] = state[base] * inv
                state[base | m] = 0.0
        else:
            outcome = 1
            inv = 1.0 / sqrt(p1)
            for r in range(dim >> 1):
                base = ((r >> s) << (s + 1)) | (r & low_mask)
                state[base] = state[base | m] * inv
                state[base | m] = 0.0

    return outcome, p0 + p1


def sv_ones_moments(double complex[::1] state, const double[::1] pc):
    cdef Py_ssize_t i, dim = state.shape[0]
    cdef double p, m1 = 0.0, m2 = 0.0
    with nogil:
        for i in range(dim):
            p = state[i].real * state[i].real + state[i].imag * state[i].imag
            m1 += p * pc[i]
            m2 += p * pc[i] * pc[i]
    return m1, m2


def sv_sample_index(double complex[::1] state, double u):
    cdef Py_ssize_t i, dim = state.shape[0]
    cdef double c = 0.0
    for i in range(dim):
        c += state[i].real * state[i].real + state[i].imag * state[i].imag
        if u < c:
            return i
    return dim - 1


def sv_run_trajectory(state_arr, int L, const uint8_t[::1] kinds,
                      const int32_t[::1] sites_a, const int32_t[::1] sites_b,
                      const int32_t[::1] gate_idx, gates_arr,
                      const double[::1] ctrl_u, const double[::1] pc,
                      outcomes_arr, mz1=None, mz2=None):
    cdef double complex[::1] state = state_arr
    cdef double complex[:, :, ::1] gates = gates_arr
    cdef signed char[::1] outcomes = outcomes_arr
    cdef double[::1] m1v = None, m2v = None
    cdef bint series = mz1 is not None
    if series:
        m1v = mz1
        m2v = mz2

    cdef Py_ssize_t t = kinds.shape[0]
    cdef Py_ssize_t k
    cdef int a, b, n_ctrl = 0, outcome
    cdef double worst = 0.0, drift, norm
    g2 = np.empty((2, 2), dtype=np.complex128)

    if series:
        m1v[0], m2v[0] = sv_ones_moments(state, pc)
    for k in range(t):
        a = sites_a[k]
        if kinds[k] == 1:
            outcome, norm = sv_measure_reset(state, L, a, ctrl_u[n_ctrl])
            n_ctrl += 1
            outcomes[k] = 1 if outcome == 0 else -1
            drift = fabs(norm - 1.0)
            if drift > worst:
                worst = drift
        else:
            b = sites_b[k]
            if b >= 0:
                sv_apply2(state, L, a, b, gates[gate_idx[k]])
            else:
                g2[0, 0] = gates[gate_idx[k], 0, 0]
                g2[0, 1] = gates[gate_idx[k], 0, 1]
                g2[1, 0] = gates[gate_idx[k], 1, 0]
                g2[1, 1] = gates[gate_idx[k], 1, 1]
                sv_apply1(state, L, a, g2)
            outcomes[k] = 0
        if series:
            m1v[k + 1], m2v[k + 1] = sv_ones_moments(state, pc)
    return worst
