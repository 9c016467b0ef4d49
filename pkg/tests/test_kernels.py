"""Compiled extension and pure-numpy kernels must agree bit for bit on the
integer paths and to rounding on the statevector path."""

import numpy as np
import pytest

from cipt._kernels import _pure
from cipt.circuit import CircuitParams, sample_circuit
from cipt.classical import dephasing_tables
from cipt.statevector import initial_state, popcount_table, _gates_stack
from cipt.statmech2 import LOGW_CTRL, LOGW_PAIR, PROB_II

try:
    from cipt._kernels import _core
except ImportError:
    _core = None

needs_compiled = pytest.mark.skipif(_core is None,
                                    reason="compiled extension not built")


def _circuit(p=0.5, L=8, ensemble="exact_haar", t_max=40, seed=99):
    params = CircuitParams(L=L, p=p, t_max=t_max, master_seed=seed,
                           ensemble=ensemble)
    return sample_circuit(params, 0)


@needs_compiled
def test_statmech1_batch_identical():
    c = _circuit()
    kinds, sa, sb = c.step_arrays
    key = 0x1234ABCD
    for p_e1 in (0.0, 0.05):
        out_c = _core.statmech1_batch(kinds, sa, sb, 8, 500, key, p_e1,
                                      record_series=True)
        out_p = _pure.statmech1_batch(kinds, sa, sb, 8, 500, key, p_e1,
                                      record_series=True)
        for a, b in zip(out_c, out_p):
            assert np.array_equal(a, b)


@needs_compiled
def test_dephasing_batch_identical():
    c = _circuit(ensemble="approx_haar_cz")
    kinds, sa, sb = c.step_arrays
    cum = dephasing_tables(c)
    out_c = _core.dephasing_batch(kinds, sa, sb, cum, 8, 400, 7,
                                  record_series=True)
    out_p = _pure.dephasing_batch(kinds, sa, sb, cum, 8, 400, 7,
                                  record_series=True)
    for a, b in zip(out_c, out_p):
        assert np.array_equal(a, b)


@needs_compiled
def test_statmech2_batch_identical():
    c = _circuit(p=0.3, L=6, t_max=30)
    kinds, sa, sb = c.step_arrays
    lw_c, nn_c = _core.statmech2_batch(kinds, sa, sb, 6, 300, 42,
                                       LOGW_PAIR, PROB_II, LOGW_CTRL)
    lw_p, nn_p = _pure.statmech2_batch(kinds, sa, sb, 6, 300, 42,
                                       LOGW_PAIR, PROB_II, LOGW_CTRL)
    assert np.array_equal(nn_c, nn_p)
    assert np.array_equal(lw_c, lw_p)


@needs_compiled
def test_sv_trajectory_matches_to_rounding():
    c = _circuit(p=0.4, L=6, t_max=30, ensemble="approx_haar_cz")
    kinds, sa, sb = c.step_arrays
    gates = _gates_stack(c)
    pc = popcount_table(6)
    rng = np.random.default_rng(17)
    u_ctrl = rng.random(c.n_controls)

    s_c = initial_state(6)
    s_p = initial_state(6)
    out_c = np.zeros(30, dtype=np.int8)
    out_p = np.zeros(30, dtype=np.int8)
    _core.sv_run_trajectory(s_c, 6, kinds, sa, sb, c.gate_index, gates,
                            u_ctrl, pc, out_c)
    _pure.sv_run_trajectory(s_p, 6, kinds, sa, sb, c.gate_index, gates,
                            u_ctrl, pc, out_p)
    assert np.array_equal(out_c, out_p)
    assert np.max(np.abs(s_c - s_p)) < 1e-12


@needs_compiled
def test_sv_primitives_match():
    rng = np.random.default_rng(23)
    L = 5
    state = rng.normal(size=2 ** L) + 1j * rng.normal(size=2 ** L)
    state /= np.linalg.norm(state)
    from cipt.circuit import haar_unitary
    g = haar_unitary(rng, 4)

    a = state.copy()
    b = state.copy()
    _core.sv_apply2(a, L, 1, 3, g)
    _pure.sv_apply2(b, L, 1, 3, g)
    assert np.max(np.abs(a - b)) < 1e-14

    g1 = haar_unitary(rng, 2)
    a2, b2 = a.copy(), a.copy()
    _core.sv_apply1(a2, L, 4, g1)
    _pure.sv_apply1(b2, L, 4, g1)
    assert np.max(np.abs(a2 - b2)) < 1e-14

    pc = popcount_table(L)
    m_c = _core.sv_ones_moments(a2, pc)
    m_p = _pure.sv_ones_moments(b2, pc)
    assert m_c == pytest.approx(m_p, abs=1e-13)

    for u in (0.0, 0.31, 0.99):
        assert _core.sv_sample_index(a2, u) == _pure.sv_sample_index(b2, u)

    a3, b3 = a2.copy(), a2.copy()
    oc, nc = _core.sv_measure_reset(a3, L, 2, 0.42)
    op, npn = _pure.sv_measure_reset(b3, L, 2, 0.42)
    assert oc == op
    assert nc == pytest.approx(npn, abs=1e-14)
    assert np.max(np.abs(a3 - b3)) < 1e-13


def test_selected_impl_reported():
    import cipt._kernels as K
    assert K.IMPL in ("compiled", "pure")
    if _core is not None:
        assert K.IMPL == "compiled"
