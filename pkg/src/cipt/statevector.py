"""Exact statevector backend.

Evolves 2^L complex amplitudes through a sampled circuit. Control steps are
projective Z measurements with Born-rule outcomes followed by the bit-flip
feedback, so the measured site always ends in |0>. Basis convention: site 0
is the most significant bit of the amplitude index.

Measurement randomness is a separate stream from circuit-structure sampling:
shot (circuit_index, shot_index) draws its uniforms from a Generator seeded
by (master_seed, TAG_SV_MEAS, circuit_index, shot_index), one uniform per
Control plus one for the terminal bitstring sample. Batch runs therefore
reproduce single-shot runs exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .circuit import CircuitRealization, CONTROL
from .errors import CapacityError, NumericalIntegrityError, ParameterError

#: implementation cap on exact simulation size
MAX_QUBITS = 16

#: stream tag for measurement uniforms (circuit structure uses TAG_CIRCUIT)
TAG_SV_MEAS = 2

#: Schmidt weights below this are treated as zero in entropy sums
ENTROPY_CUTOFF = 1e-14

_NORM_TOL = 1e-8

_pc_cache: dict[int, np.ndarray] = {}


def popcount_table(L: int) -> np.ndarray:
    """float64 table of set-bit counts for all 2^L basis indices."""
    if L not in _pc_cache:
        idx = np.arange(1 << L, dtype=np.uint64)
        _pc_cache[L] = np.bitwise_count(idx).astype(np.float64)
    return _pc_cache[L]


def initial_state(L: int, bits=None) -> np.ndarray:
    """|bits> as a dense statevector; default is all ones, |1...1>."""
    if L > MAX_QUBITS:
        raise CapacityError(f"L={L} exceeds the statevector cap ({MAX_QUBITS})")
    if bits is None:
        bits = np.ones(L, dtype=np.uint8)
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.shape != (L,) or bits.max(initial=0) > 1:
        raise ParameterError("initial bits must be a length-L 0/1 array")
    idx = 0
    for b in bits:
        idx = (idx << 1) | int(b)
    state = np.zeros(1 << L, dtype=np.complex128)
    state[idx] = 1.0
    return state


def magnetization(state: np.ndarray, L: int) -> float:
    """<Mz> with Mz = (1/L) sum_i Z_i."""
    m1, _ = K.sv_ones_moments(state, popcount_table(L))
    return (L - 2.0 * m1) / L


def magnetization_moments(state: np.ndarray, L: int) -> tuple[float, float]:
    """(<Mz>, <Mz^2>) from the set-bit count moments."""
    m1, m2 = K.sv_ones_moments(state, popcount_table(L))
    mz = (L - 2.0 * m1) / L
    mz_sq = (L * L - 4.0 * L * m1 + 4.0 * m2) / (L * L)
    return mz, mz_sq


def half_chain_entropy(state: np.ndarray, L: int, cut: int | None = None) -> float:
    """von Neumann entropy (base 2) of sites [0, cut) via SVD."""
    if cut is None:
        cut = L // 2
    if not 0 < cut < L:
        raise ParameterError(f"cut must be in (0, {L}), got {cut}")
    s = np.linalg.svd(state.reshape(1 << cut, -1), compute_uv=False)
    lam = s * s
    lam = lam[lam > ENTROPY_CUTOFF]
    return float(-(lam * np.log2(lam)).sum())


def fixed_point_fidelity(state: np.ndarray) -> float:
    """Overlap |<0...0|psi>|^2 with the absorbing state."""
    a = state[0]
    return float(a.real * a.real + a.imag * a.imag)


def sample_final_bitstring(state: np.ndarray, L: int, u: float) -> np.ndarray:
    """One bitstring drawn from |psi|^2 using the uniform variate u."""
    idx = K.sv_sample_index(state, u)
    return np.array([(idx >> (L - 1 - i)) & 1 for i in range(L)], dtype=np.uint8)


@dataclass(frozen=True)
class ProbeConfig:
    """What to record along a trajectory beyond the final Mz moments."""

    mz_series: bool = False
    entropy_final: bool = False
    entropy_series: bool = False
    entropy_cut: int | None = None
    sample_bitstring: bool = False
    fidelity: bool = False
    keep_state: bool = False


@dataclass
class ShotRecord:
    """One trajectory's record. outcomes[k] is +1/-1 at Control steps
    (+1 for projecting onto |0>), 0 at Chaotic steps."""

    backend: str
    circuit_index: int
    shot_index: int
    outcomes: np.ndarray
    mz_final: float
    mz_sq_final: float
    mz_series: np.ndarray | None = None
    mz_sq_series: np.ndarray | None = None
    entropy_final: float | None = None
    entropy_series: np.ndarray | None = None
    final_bitstring: np.ndarray | None = None
    fidelity_final: float | None = None
    state: np.ndarray | None = field(default=None, repr=False)


def _measure_rng(c: CircuitRealization, shot_index: int) -> np.random.Generator:
    ss = np.random.SeedSequence((c.params.master_seed, TAG_SV_MEAS,
                                 c.circuit_index, shot_index))
    return np.random.default_rng(ss)


def _gates_stack(c: CircuitRealization):
    """(G, 4, 4) complex stack; single-site gates sit in the top-left block."""
    n_gates = int((c.kinds == 0).sum())
    gates = np.zeros((max(n_gates, 1), 4, 4), dtype=np.complex128)
    for k in range(c.t_max):
        g = int(c.gate_index[k])
        if g < 0:
            continue
        m = c.gate_matrix(k)
        gates[g, :m.shape[0], :m.shape[1]] = m
    return gates


def run_shot(c: CircuitRealization, shot_index: int, initial_bits=None,
             probes: ProbeConfig | None = None) -> ShotRecord:
    """Run one trajectory of circuit c.

    The heavy no-probe path delegates the whole step loop to the kernel;
    probe paths step through Python so intermediate states are available.
    """
    probes = probes or ProbeConfig()
    L = c.params.L
    state = initial_state(L, initial_bits)
    pc = popcount_table(L)
    kinds, sites_a, sites_b = c.step_arrays
    rng = _measure_rng(c, shot_index)
    n_ctrl = c.n_controls
    u_ctrl = rng.random(n_ctrl)
    u_final = rng.random()
    t = c.t_max
    outcomes = np.zeros(t, dtype=np.int8)

    mid_probes = probes.mz_series or probes.entropy_series
    if not mid_probes:
        gates = _gates_stack(c)
        worst = K.sv_run_trajectory(state, L, kinds, sites_a, sites_b,
                                    c.gate_index, gates, u_ctrl, pc, outcomes)
        if worst > _NORM_TOL:
            raise NumericalIntegrityError(f"norm drift {worst:.3e} exceeds {_NORM_TOL}")
        mz_series = mz_sq_series = ent_series = None
    else:
        cut = probes.entropy_cut
        mz_series = np.empty(t + 1) if probes.mz_series else None
        mz_sq_series = np.empty(t + 1) if probes.mz_series else None
        ent_series = np.empty(t + 1) if probes.entropy_series else None
        j = 0
        for k in range(-1, t):
            if k >= 0:
                a = int(sites_a[k])
                if kinds[k] == CONTROL:
                    outcome, norm = K.sv_measure_reset(state, L, a, u_ctrl[j])
                    j += 1
                    outcomes[k] = 1 if outcome == 0 else -1
                    if abs(norm - 1.0) > _NORM_TOL:
                        raise NumericalIntegrityError(
                            f"norm drift {abs(norm - 1.0):.3e} exceeds {_NORM_TOL}")
                else:
                    b = int(sites_b[k])
                    m = c.gate_matrix(k)
                    if b >= 0:
                        K.sv_apply2(state, L, a, b, m)
                    else:
                        K.sv_apply1(state, L, a, m)
            if probes.mz_series:
                mz_series[k + 1], mz_sq_series[k + 1] = magnetization_moments(state, L)
            if probes.entropy_series:
                ent_series[k + 1] = half_chain_entropy(state, L, cut)

    norm = float(np.vdot(state, state).real)
    if abs(norm - 1.0) > _NORM_TOL:
        raise NumericalIntegrityError(f"final norm drift {abs(norm - 1.0):.3e}")

    mz_final, mz_sq_final = magnetization_moments(state, L)
    rec = ShotRecord(backend="statevector", circuit_index=c.circuit_index,
                     shot_index=shot_index, outcomes=outcomes,
                     mz_final=mz_final, mz_sq_final=mz_sq_final,
                     mz_series=mz_series, mz_sq_series=mz_sq_series,
                     entropy_series=ent_series)
    if probes.entropy_final:
        rec.entropy_final = half_chain_entropy(state, L, probes.entropy_cut)
    if probes.sample_bitstring:
        rec.final_bitstring = sample_final_bitstring(state, L, u_final)
    if probes.fidelity:
        rec.fidelity_final = fixed_point_fidelity(state)
    if probes.keep_state:
        rec.state = state
    return rec


@dataclass
class ShotBatch:
    """Per-shot observables for one circuit, ready for circuit_stats."""

    backend: str
    mode: str
    mz: np.ndarray
    mz_sq: np.ndarray
    entropy: np.ndarray | None = None


def run_circuit_shots(c: CircuitRealization, n_shots: int, mode: str = "expectation",
                      initial_bits=None, entropy_final: bool = False) -> ShotBatch:
    """n_shots trajectories of one circuit, returning per-shot Mz data.

    mode 'expectation' records (<Mz>, <Mz^2>) of the final state; mode
    'bitstring' samples one terminal bitstring per shot (experiment-faithful)
    so mz_sq is just mz^2.
    """
    if mode not in ("expectation", "bitstring"):
        raise ParameterError(f"unknown estimator mode {mode!r}")
    if n_shots < 1:
        raise ParameterError(f"n_shots must be >= 1, got {n_shots}")
    L = c.params.L
    pc = popcount_table(L)
    kinds, sites_a, sites_b = c.step_arrays
    gates = _gates_stack(c)
    n_ctrl = c.n_controls
    t = c.t_max
    outcomes = np.zeros(t, dtype=np.int8)
    mz = np.empty(n_shots)
    mz_sq = np.empty(n_shots)
    ent = np.empty(n_shots) if entropy_final else None

    for s in range(n_shots):
        state = initial_state(L, initial_bits)
        rng = _measure_rng(c, s)
        u_ctrl = rng.random(n_ctrl)
        u_final = rng.random()
        worst = K.sv_run_trajectory(state, L, kinds, sites_a, sites_b,
                                    c.gate_index, gates, u_ctrl, pc, outcomes)
        norm = float(np.vdot(state, state).real)
        worst = max(worst, abs(norm - 1.0))
        if worst > _NORM_TOL:
            raise NumericalIntegrityError(f"norm drift {worst:.3e} exceeds {_NORM_TOL}")
        if mode == "expectation":
            mz[s], mz_sq[s] = magnetization_moments(state, L)
        else:
            idx = K.sv_sample_index(state, u_final)
            k_ones = float(pc[idx])
            m = (L - 2.0 * k_ones) / L
            mz[s] = m
            mz_sq[s] = m * m
        if entropy_final:
            ent[s] = half_chain_entropy(state, L)

    return ShotBatch(backend="statevector", mode=mode, mz=mz, mz_sq=mz_sq,
                     entropy=ent)
