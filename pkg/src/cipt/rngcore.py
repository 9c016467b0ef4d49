"""Counter-based random stream shared by the compiled and pure kernels.

Shot-level sampling uses a stateless splitmix64-style mixer: every variate is
a pure function of (stream key, step, shot, slot). This makes shots and steps
order-independent, so results are byte-identical no matter how tasks are
chunked across workers, and the compiled and pure kernels consume exactly the
same bits.

Circuit-level sampling (gate angles, Haar matrices) does not go through this
module; it uses numpy Generators seeded per circuit, see circuit.py.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_STEP_MULT = 0xD1B54A32D192ED03

#: step index reserved for initial-state draws (never a real step index)
INIT_STEP = 0xFFFFFFFF

#: inverse of 2^53, for mapping the top 53 bits to [0, 1)
_INV53 = 1.0 / 9007199254740992.0


def mix64(x: int) -> int:
    """splitmix64 finalizer on a 64-bit integer."""
    x &= MASK64
    x ^= x >> 30
    x = (x * 0xBF58476D1CE4E5B9) & MASK64
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & MASK64
    x ^= x >> 31
    return x


def derive_key(*parts: int) -> int:
    """Fold integer identifiers (master seed, circuit index, stream tag, ...)
    into a 64-bit stream key."""
    h = 0x243F6A8885A308D3  # pi fractional bits
    for v in parts:
        h = mix64(h ^ mix64((int(v) + GOLDEN) & MASK64))
    return h


def draw_u64(key: int, step: int, shot: int, slot: int) -> int:
    """The (step, shot, slot) variate of stream `key`, as a uint64."""
    a = mix64(key ^ ((step * _STEP_MULT) & MASK64))
    return mix64(a ^ ((shot * GOLDEN + slot) & MASK64))


def draw_u01(key: int, step: int, shot: int, slot: int) -> float:
    """Same variate mapped to a double in [0, 1) via the top 53 bits."""
    return (draw_u64(key, step, shot, slot) >> 11) * _INV53


# -- vectorized variants (used by the pure kernels) --------------------------

def _mix64_vec(x: np.ndarray) -> np.ndarray:
    x = x.astype(np.uint64, copy=True)
    x ^= x >> np.uint64(30)
    x *= np.uint64(0xBF58476D1CE4E5B9)
    x ^= x >> np.uint64(27)
    x *= np.uint64(0x94D049BB133111EB)
    x ^= x >> np.uint64(31)
    return x


def draw_u64_shots(key: int, step: int, shots: np.ndarray, slot: int) -> np.ndarray:
    """Vector of uint64 variates for an array of shot indices."""
    a = mix64(key ^ ((step * _STEP_MULT) & MASK64))
    ctr = shots.astype(np.uint64) * np.uint64(GOLDEN) + np.uint64(slot)
    return _mix64_vec(np.uint64(a) ^ ctr)


def draw_u01_shots(key: int, step: int, shots: np.ndarray, slot: int) -> np.ndarray:
    return (draw_u64_shots(key, step, shots, slot) >> np.uint64(11)) * _INV53


def draw_bits_shots(key: int, step: int, shots: np.ndarray, slot: int) -> np.ndarray:
    """Vector of single uniform bits (top bit of the variate), dtype uint8."""
    return (draw_u64_shots(key, step, shots, slot) >> np.uint64(63)).astype(np.uint8)
