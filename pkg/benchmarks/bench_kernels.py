"""Time the compiled kernels against the pure-numpy fallbacks.

Run from the repository root:

    python3 benchmarks/bench_kernels.py

Both implementations are driven through identical inputs; the integer-path
kernels are also checked for byte-identical results while we are at it.
"""

import time

import numpy as np

from cipt._kernels import _pure
from cipt.circuit import CircuitParams, sample_circuit
from cipt.classical import dephasing_tables
from cipt.statevector import _gates_stack, initial_state, popcount_table
from cipt.statmech2 import LOGW_CTRL, LOGW_PAIR, PROB_II

try:
    from cipt._kernels import _core
except ImportError:
    _core = None


def _time(fn, repeat=3):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def _row(name, t_pure, t_core):
    speedup = t_pure / t_core if t_core else float("nan")
    print(f"{name:<22} pure {t_pure * 1e3:9.2f} ms   "
          f"compiled {t_core * 1e3:9.2f} ms   x{speedup:.1f}")


def main():
    if _core is None:
        print("compiled extension not built; nothing to compare")
        return

    L, t_max, n_shots = 32, 512, 4000
    c = sample_circuit(CircuitParams(L=L, p=0.5, t_max=t_max, master_seed=3), 0)
    kinds, sa, sb = c.step_arrays

    t_p, out_p = _time(lambda: _pure.statmech1_batch(
        kinds, sa, sb, L, n_shots, 17, 0.0))
    t_c, out_c = _time(lambda: _core.statmech1_batch(
        kinds, sa, sb, L, n_shots, 17, 0.0))
    assert np.array_equal(out_p[0], out_c[0])
    _row(f"statmech1 L={L}", t_p, t_c)

    ch = sample_circuit(CircuitParams(L=L, p=0.5, t_max=t_max, master_seed=4,
                                      ensemble="approx_haar_cz"), 0)
    kh, sah, sbh = ch.step_arrays
    cum = dephasing_tables(ch)
    t_p, out_p = _time(lambda: _pure.dephasing_batch(
        kh, sah, sbh, cum, L, n_shots, 19))
    t_c, out_c = _time(lambda: _core.dephasing_batch(
        kh, sah, sbh, cum, L, n_shots, 19))
    assert np.array_equal(out_p[0], out_c[0])
    _row(f"dephasing L={L}", t_p, t_c)

    c6 = sample_circuit(CircuitParams(L=6, p=0.3, t_max=36, master_seed=5), 0)
    k6, sa6, sb6 = c6.step_arrays
    t_p, out_p = _time(lambda: _pure.statmech2_batch(
        k6, sa6, sb6, 6, 20000, 23, LOGW_PAIR, PROB_II, LOGW_CTRL))
    t_c, out_c = _time(lambda: _core.statmech2_batch(
        k6, sa6, sb6, 6, 20000, 23, LOGW_PAIR, PROB_II, LOGW_CTRL))
    assert np.array_equal(out_p[0], out_c[0])
    _row("statmech2 L=6", t_p, t_c)

    Lq = 12
    cq = sample_circuit(CircuitParams(L=Lq, p=0.5, t_max=Lq * Lq // 2,
                                      master_seed=6), 0)
    kq, saq, sbq = cq.step_arrays
    gates = _gates_stack(cq)
    pc = popcount_table(Lq)
    rng = np.random.default_rng(29)
    u_ctrl = rng.random(cq.n_controls)
    outc = np.zeros(cq.t_max, dtype=np.int8)

    def run(impl):
        state = initial_state(Lq)
        impl.sv_run_trajectory(state, Lq, kq, saq, sbq, cq.gate_index,
                               gates, u_ctrl, pc, outc.copy())
        return state

    t_p, s_p = _time(lambda: run(_pure))
    t_c, s_c = _time(lambda: run(_core))
    assert np.max(np.abs(s_p - s_c)) < 1e-12
    _row(f"statevector L={Lq}", t_p, t_c)


if __name__ == "__main__":
    main()
