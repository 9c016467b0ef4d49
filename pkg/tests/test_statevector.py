import numpy as np
import pytest

from cipt.circuit import CONTROL, CircuitParams, sample_circuit
from cipt.errors import CapacityError, ParameterError
from cipt.statevector import (MAX_QUBITS, ProbeConfig, half_chain_entropy,
                              run_circuit_shots, run_shot)

from conftest import binomial_bounds


def _apply_gate_dense(state, gate, sites, L):
    """Reference gate application via full-operator kron (slow, exact)."""
    op = np.eye(1, dtype=np.complex128)
    full = np.zeros((2 ** L, 2 ** L), dtype=np.complex128)
    # build by index mapping: basis |b_0 ... b_{L-1}>, site 0 most significant
    for idx in range(2 ** L):
        bits = [(idx >> (L - 1 - s)) & 1 for s in range(L)]
        sub = 0
        for s in sites:
            sub = (sub << 1) | bits[s]
        for sub_out in range(gate.shape[0]):
            amp = gate[sub_out, sub]
            if amp == 0:
                continue
            out_bits = list(bits)
            tmp = sub_out
            for s in reversed(sites):
                out_bits[s] = tmp & 1
                tmp >>= 1
            out_idx = 0
            for b in out_bits:
                out_idx = (out_idx << 1) | b
            full[out_idx, idx] += amp
    return full @ state


def test_all_control_reaches_vacuum():
    # p=1 steers every visited site to |0>; after a full sweep mz = 1
    c = sample_circuit(CircuitParams(L=6, p=1.0, t_max=18, master_seed=4), 0)
    batch = run_circuit_shots(c, 4, mode="bitstring")
    assert np.all(batch.mz == 1.0)
    assert np.all(batch.mz_sq == 1.0)


def test_expectation_mode_exact_at_p1():
    c = sample_circuit(CircuitParams(L=6, p=1.0, t_max=18, master_seed=4), 0)
    batch = run_circuit_shots(c, 2, mode="expectation")
    assert np.allclose(batch.mz, 1.0, atol=1e-12)
    assert np.allclose(batch.mz_sq, 1.0, atol=1e-12)


def test_uniform_state_second_moment():
    # |+>^L has <Mz> = 0 and <Mz^2> = 1/L
    L = 8
    state = np.full(2 ** L, 2.0 ** (-L / 2), dtype=np.complex128)
    from cipt._kernels import sv_ones_moments
    pc = np.array([bin(i).count("1") for i in range(2 ** L)],
                  dtype=np.float64)
    m1, m2 = sv_ones_moments(state, pc)
    mz = (L - 2.0 * m1) / L
    mz2 = (L * L - 4.0 * L * m1 + 4.0 * m2) / (L * L)
    assert abs(mz) < 1e-12
    assert abs(mz2 - 1.0 / L) < 1e-12


def test_gate_locality(rng):
    # a 2-site gate must leave the reduced state of the other sites unchanged
    from cipt.circuit import haar_unitary
    from cipt._kernels import sv_apply2
    L = 5
    state = rng.standard_normal(2 ** L) + 1j * rng.standard_normal(2 ** L)
    state = (state / np.linalg.norm(state)).astype(np.complex128)
    gate = haar_unitary(rng, 4)
    out = state.copy()
    sv_apply2(out, L, 2, 3, np.ascontiguousarray(gate))
    ref = _apply_gate_dense(state, gate, (2, 3), L)
    assert np.allclose(out, ref, atol=1e-12)
    # reduced density matrix on sites {0, 1, 4}
    t_in = state.reshape([2] * L)
    t_out = out.reshape([2] * L)
    rho_in = np.tensordot(t_in, t_in.conj(), axes=([2, 3], [2, 3]))
    rho_out = np.tensordot(t_out, t_out.conj(), axes=([2, 3], [2, 3]))
    assert np.allclose(rho_in, rho_out, atol=1e-12)


def test_measurement_frequency_binomial(rng):
    # Born frequencies of the first control outcome match the pre-measurement
    # probability
    L = 4
    params = CircuitParams(L=L, p=0.5, t_max=6, master_seed=12)
    c = None
    for ci in range(50):
        cand = sample_circuit(params, ci)
        kinds = list(cand.kinds)
        if CONTROL in kinds and kinds.index(CONTROL) > 0:
            c = cand
            break
    assert c is not None
    first_ctl = list(c.kinds).index(CONTROL)
    n_shots = 3000
    records = [run_shot(c, s) for s in range(n_shots)]
    # outcome -1 marks projection onto |1> at the control step
    ups = sum(1 for r in records if r.outcomes[first_ctl] == -1)
    # the pre-measurement |1> probability is shot-independent: every step
    # before the first control is deterministic unitary evolution
    site = c.sites[first_ctl]
    state = np.zeros(2 ** L, dtype=np.complex128)
    state[2 ** L - 1] = 1.0  # all ones initial state
    from cipt._kernels import sv_apply2
    for k in range(first_ctl):
        gate = c.steps[k].gate.to_matrix()
        lo = c.sites[k]
        sv_apply2(state, L, lo, (lo + 1) % L, np.ascontiguousarray(gate))
    idx = np.arange(2 ** L)
    bit = (idx >> (L - 1 - site)) & 1
    p_up = float(np.sum(np.abs(state[bit == 1]) ** 2))
    lo_b, hi_b = binomial_bounds(n_shots, p_up)
    assert lo_b <= ups <= hi_b


def test_trajectory_matches_channel_oracle(rng):
    # empirical final-bitstring distribution vs exact density-matrix
    # propagation with the measurement-feedback channel
    L = 4
    c = sample_circuit(CircuitParams(L=L, p=0.5, t_max=10, master_seed=21), 3)
    dim = 2 ** L
    rho = np.zeros((dim, dim), dtype=np.complex128)
    rho[dim - 1, dim - 1] = 1.0
    for k, op in enumerate(c.steps):
        if op.kind == CONTROL:
            site = op.site
            idx = np.arange(dim)
            bit = (idx >> (L - 1 - site)) & 1
            p0 = np.outer(bit == 0, bit == 0)
            p1 = np.outer(bit == 1, bit == 1)
            rho0 = np.where(p0, rho, 0.0)
            rho1 = np.where(p1, rho, 0.0)
            # X on the measured site maps index i to i ^ mask
            mask = 1 << (L - 1 - site)
            perm = idx ^ mask
            rho = rho0 + rho1[np.ix_(perm, perm)]
        else:
            gate = op.gate.to_matrix()
            full = _apply_gate_dense(np.eye(dim, dtype=np.complex128), gate,
                                     (op.site, (op.site + 1) % L), L)
            rho = full @ rho @ full.conj().T
    probs = np.real(np.diag(rho))
    assert abs(probs.sum() - 1.0) < 1e-10

    n_shots = 30000
    counts = np.zeros(dim)
    probes = ProbeConfig(sample_bitstring=True)
    for s in range(n_shots):
        r = run_shot(c, s, probes=probes)
        idx = 0
        for b in r.final_bitstring:
            idx = (idx << 1) | int(b)
        counts[idx] += 1
    tv = 0.5 * np.abs(counts / n_shots - probs).sum()
    assert tv < 0.02


def test_entropy_final_and_page_value(rng):
    # mean half-chain entropy of Haar-random states matches the Page value
    L = 10
    n_states = 100
    vals = np.empty(n_states)
    for i in range(n_states):
        state = rng.standard_normal(2 ** L) + 1j * rng.standard_normal(2 ** L)
        state /= np.linalg.norm(state)
        vals[i] = half_chain_entropy(state.astype(np.complex128), L)
    # Page: (H_{mn} - H_n - (m-1)/(2n)) / ln 2 with m = n = 2^{L/2}
    m = n = 2 ** (L // 2)
    harm = np.sum(1.0 / np.arange(1, m * n + 1))
    harm_n = np.sum(1.0 / np.arange(1, n + 1))
    page_bits = (harm - harm_n - (m - 1) / (2.0 * n)) / np.log(2.0)
    assert abs(vals.mean() - page_bits) < 0.05


def test_run_circuit_shots_entropy_flag():
    c = sample_circuit(CircuitParams(L=6, p=0.2, t_max=18, master_seed=8), 0)
    batch = run_circuit_shots(c, 3, mode="bitstring", entropy_final=True)
    assert batch.entropy.shape == (3,)
    assert np.all(batch.entropy >= -1e-12)
    batch2 = run_circuit_shots(c, 3, mode="bitstring")
    assert batch2.entropy is None


def test_capacity_limit():
    with pytest.raises(CapacityError):
        run_circuit_shots(
            sample_circuit(CircuitParams(L=MAX_QUBITS + 2, p=0.5, t_max=2,
                                         master_seed=0), 0), 1)


def test_initial_bits_override():
    # all-zero start at p=1 stays the vacuum
    c = sample_circuit(CircuitParams(L=4, p=1.0, t_max=4, master_seed=2), 0)
    batch = run_circuit_shots(c, 2, mode="bitstring",
                              initial_bits=np.zeros(4, dtype=np.uint8))
    assert np.all(batch.mz == 1.0)
    with pytest.raises(ParameterError):
        run_circuit_shots(c, 2, initial_bits=np.zeros(3, dtype=np.uint8))


def test_bad_mode_and_shots():
    c = sample_circuit(CircuitParams(L=4, p=0.5, t_max=4, master_seed=2), 0)
    with pytest.raises(ParameterError):
        run_circuit_shots(c, 1, mode="histogram")
    with pytest.raises(ParameterError):
        run_circuit_shots(c, 0)
