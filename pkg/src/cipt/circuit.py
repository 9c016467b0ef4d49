"""Adaptive Bernoulli circuit sampling.

A circuit on L sites is a sequence of steps at a walker position i_k. Each
step is a Control with probability p (projective Z measurement of site i_k
followed by a bit-flip feedback that leaves the site in |0>), otherwise a
Chaotic two-site scrambling gate on (i_k, i_k+1). The walker moves one site
up after a Chaotic step and one site down after a Control step, with
periodic wrap or open-boundary clamping.

Chaotic gates come from one of two ensembles:

* ``approx_haar_cz``: (U1 x U2) CZ^cz (U3 x U4) with each single-qubit factor
  Rx(a) Rz(b) Rx(c) and all 12 angles uniform in [0, 2pi). cz is present
  except at the open-boundary edge, where the gate degenerates to the
  single-site product U1 U3.
* ``exact_haar``: a Haar-random U(4) (U(2) at the open-boundary edge).

Sampling is deterministic given (master_seed, circuit_index): each circuit
owns a numpy Generator seeded from that pair, and the per-step draw order
(kind first, then 12 angles or the Haar matrix) is part of the format
contract.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import FormatError, ParameterError, UnsupportedVersionError

CHAOTIC = 0
CONTROL = 1

BOUNDARIES = ("periodic", "open")
ENSEMBLES = ("approx_haar_cz", "exact_haar")

FORMAT_VERSION = 1
_MAGIC = b"CIPT"
_HEADER = struct.Struct("<4sBQ")  # magic, version, payload length

#: stream tag separating circuit-structure draws from measurement draws
TAG_CIRCUIT = 1

_CZ = np.diag([1.0, 1.0, 1.0, -1.0]).astype(np.complex128)


@dataclass(frozen=True)
class CircuitParams:
    """Static parameters of the circuit ensemble.

    t_max defaults to L^2 / 2 (the diffusive relaxation scale) when omitted.
    """

    L: int
    p: float
    t_max: int | None = None
    boundary: str = "periodic"
    ensemble: str = "approx_haar_cz"
    master_seed: int = 0
    initial_position: int = 0

    def __post_init__(self):
        if self.L < 2:
            raise ParameterError(f"L must be >= 2, got {self.L}")
        if not 0.0 <= self.p <= 1.0:
            raise ParameterError(f"p must be in [0, 1], got {self.p}")
        if self.boundary not in BOUNDARIES:
            raise ParameterError(f"boundary must be one of {BOUNDARIES}")
        if self.ensemble not in ENSEMBLES:
            raise ParameterError(f"ensemble must be one of {ENSEMBLES}")
        if self.t_max is None:
            object.__setattr__(self, "t_max", (self.L * self.L) // 2)
        if self.t_max < 0:
            raise ParameterError(f"t_max must be >= 0, got {self.t_max}")
        if not 0 <= self.initial_position < self.L:
            raise ParameterError(
                f"initial_position must be in [0, {self.L}), got {self.initial_position}")
        if self.master_seed < 0:
            raise ParameterError("master_seed must be a non-negative integer")


def rx(theta: float) -> np.ndarray:
    """Rotation exp(-i theta X / 2)."""
    c = np.cos(theta / 2.0)
    s = np.sin(theta / 2.0)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=np.complex128)


def rz(theta: float) -> np.ndarray:
    """Rotation exp(-i theta Z / 2)."""
    return np.array([[np.exp(-0.5j * theta), 0.0],
                     [0.0, np.exp(0.5j * theta)]], dtype=np.complex128)


def _u_xzx(theta, phi, lam):
    return rx(theta) @ rz(phi) @ rx(lam)


def approx_haar_gate(angles: np.ndarray, cz_present: bool = True) -> np.ndarray:
    """4x4 gate (U1 x U2) CZ^cz (U3 x U4) from 12 angles.

    Angle layout: (theta, phi, lambda) for U1, then U2, U3, U4.
    """
    angles = np.asarray(angles, dtype=np.float64)
    if angles.shape != (12,):
        raise ParameterError(f"expected 12 angles, got shape {angles.shape}")
    u1 = _u_xzx(*angles[0:3])
    u2 = _u_xzx(*angles[3:6])
    u3 = _u_xzx(*angles[6:9])
    u4 = _u_xzx(*angles[9:12])
    g = np.kron(u1, u2)
    if cz_present:
        g = g @ _CZ
    return g @ np.kron(u3, u4)


def approx_haar_gate_edge(angles: np.ndarray) -> np.ndarray:
    """2x2 gate U1 U3 for the open-boundary edge (no partner site, no CZ)."""
    angles = np.asarray(angles, dtype=np.float64)
    return _u_xzx(*angles[0:3]) @ _u_xzx(*angles[6:9])


def haar_unitary(rng: np.random.Generator, dim: int = 4) -> np.ndarray:
    """Haar-random unitary via QR of a complex Gaussian matrix.

    The phase convention fixes the R factor to a positive diagonal, which
    makes the distribution exactly Haar rather than QR-convention dependent.
    """
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim)))
    z *= np.sqrt(0.5)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def _check_unitary(m: np.ndarray, tol: float = 1e-9):
    eye = np.eye(m.shape[0])
    if not np.allclose(m.conj().T @ m, eye, atol=tol):
        raise ParameterError("gate matrix is not unitary within 1e-9")


@dataclass(frozen=True)
class GateSpec:
    """One chaotic gate: either 12 angles (+ cz flag) or an explicit matrix.

    n_sites is 2 except for the open-boundary edge gate.
    """

    ensemble: str
    n_sites: int = 2
    angles: np.ndarray | None = None
    cz_present: bool | None = None
    matrix: np.ndarray | None = None

    def __post_init__(self):
        if self.ensemble == "approx_haar_cz":
            if self.angles is None or self.cz_present is None:
                raise ParameterError("approx_haar_cz gate needs angles and cz flag")
            if np.asarray(self.angles).shape != (12,):
                raise ParameterError("approx_haar_cz gate needs 12 angles")
        elif self.ensemble == "exact_haar":
            if self.matrix is None:
                raise ParameterError("exact_haar gate needs an explicit matrix")
            dim = 2 ** self.n_sites
            if self.matrix.shape != (dim, dim):
                raise ParameterError(
                    f"gate matrix shape {self.matrix.shape} does not match "
                    f"{self.n_sites} sites")
            _check_unitary(self.matrix)
        else:
            raise ParameterError(f"unknown ensemble {self.ensemble!r}")

    def to_matrix(self) -> np.ndarray:
        """Dense unitary for this gate (4x4, or 2x2 for an edge gate)."""
        if self.matrix is not None:
            return self.matrix
        if self.n_sites == 2:
            return approx_haar_gate(self.angles, self.cz_present)
        return approx_haar_gate_edge(self.angles)


@dataclass(frozen=True)
class StepOp:
    """One circuit step: kind, walker site, and the gate for chaotic steps."""

    kind: int
    site: int
    gate: GateSpec | None = None

    @property
    def measured_site(self) -> int | None:
        return self.site if self.kind == CONTROL else None


@dataclass(eq=False)
class CircuitRealization:
    """A sampled circuit: step kinds, walker path and gate payloads.

    Gate payloads are stored as arrays (angles per chaotic step, or explicit
    matrices) so that bulk backends never build per-step Python objects; the
    ``steps`` view materializes StepOp/GateSpec lazily for the record API.
    """

    params: CircuitParams
    circuit_index: int
    kinds: np.ndarray            # uint8[t]
    sites: np.ndarray            # int32[t], walker position per step
    gate_index: np.ndarray       # int32[t], ordinal among chaotic steps, -1 at controls
    angles: np.ndarray | None = None    # (n_gates, 12) for approx_haar_cz
    matrices: list = field(default_factory=list)  # for exact_haar

    @property
    def t_max(self) -> int:
        return len(self.kinds)

    @property
    def n_controls(self) -> int:
        return int(self.kinds.sum())

    def partner_site(self, k: int) -> int:
        """Second site of the chaotic gate at step k, or -1 if single-site."""
        if self.kinds[k] == CONTROL:
            return -1
        site = int(self.sites[k])
        L = self.params.L
        if site == L - 1:
            return 0 if self.params.boundary == "periodic" else -1
        return site + 1

    @cached_property
    def step_arrays(self):
        """(kinds uint8, sites_a int32, sites_b int32) for the kernels."""
        t = self.t_max
        sites_b = np.empty(t, dtype=np.int32)
        for k in range(t):
            sites_b[k] = self.partner_site(k)
        return (np.ascontiguousarray(self.kinds, dtype=np.uint8),
                np.ascontiguousarray(self.sites, dtype=np.int32),
                sites_b)

    def gate_spec(self, k: int) -> GateSpec:
        """GateSpec for the chaotic step k."""
        g = int(self.gate_index[k])
        if g < 0:
            raise ParameterError(f"step {k} is a Control, it has no gate")
        n_sites = 1 if self.partner_site(k) < 0 else 2
        if self.params.ensemble == "approx_haar_cz":
            return GateSpec(ensemble="approx_haar_cz", n_sites=n_sites,
                            angles=self.angles[g],
                            cz_present=bool(n_sites == 2))
        return GateSpec(ensemble="exact_haar", n_sites=n_sites,
                        matrix=self.matrices[g])

    def gate_matrix(self, k: int) -> np.ndarray:
        """Dense unitary of the chaotic step k."""
        g = int(self.gate_index[k])
        if g < 0:
            raise ParameterError(f"step {k} is a Control, it has no gate")
        if self.params.ensemble == "exact_haar":
            return self.matrices[g]
        if self.partner_site(k) < 0:
            return approx_haar_gate_edge(self.angles[g])
        return approx_haar_gate(self.angles[g], cz_present=True)

    @cached_property
    def steps(self) -> list[StepOp]:
        out = []
        for k in range(self.t_max):
            if self.kinds[k] == CONTROL:
                out.append(StepOp(kind=CONTROL, site=int(self.sites[k])))
            else:
                out.append(StepOp(kind=CHAOTIC, site=int(self.sites[k]),
                                  gate=self.gate_spec(k)))
        return out

    def __eq__(self, other):
        if not isinstance(other, CircuitRealization):
            return NotImplemented
        if self.params != other.params or self.circuit_index != other.circuit_index:
            return False
        if not (np.array_equal(self.kinds, other.kinds)
                and np.array_equal(self.sites, other.sites)):
            return False
        if self.angles is None is not other.angles or \
           (self.angles is not None and other.angles is None):
            return False
        if self.angles is not None and not np.array_equal(self.angles, other.angles):
            return False
        if len(self.matrices) != len(other.matrices):
            return False
        return all(np.array_equal(a, b) for a, b in zip(self.matrices, other.matrices))


def circuit_rng(params: CircuitParams, circuit_index: int) -> np.random.Generator:
    """Structure-sampling Generator for one circuit. Measurement streams use
    separate tags, see the backends."""
    ss = np.random.SeedSequence((params.master_seed, TAG_CIRCUIT, circuit_index))
    return np.random.default_rng(ss)


def _advance(pos: int, kind: int, L: int, boundary: str) -> int:
    pos = pos + 1 if kind == CHAOTIC else pos - 1
    if boundary == "periodic":
        return pos % L
    return min(max(pos, 0), L - 1)


def sample_circuit(params: CircuitParams, circuit_index: int) -> CircuitRealization:
    """Draw one circuit realization (kinds, walker path, gate payloads)."""
    if circuit_index < 0:
        raise ParameterError("circuit_index must be >= 0")
    rng = circuit_rng(params, circuit_index)
    t = params.t_max
    L = params.L
    kinds = np.empty(t, dtype=np.uint8)
    sites = np.empty(t, dtype=np.int32)
    gate_index = np.full(t, -1, dtype=np.int32)
    approx = params.ensemble == "approx_haar_cz"
    angle_rows = [] if approx else None
    matrices = []

    pos = params.initial_position
    n_gates = 0
    for k in range(t):
        kind = CONTROL if rng.random() < params.p else CHAOTIC
        kinds[k] = kind
        sites[k] = pos
        if kind == CHAOTIC:
            at_edge = params.boundary == "open" and pos == L - 1
            gate_index[k] = n_gates
            n_gates += 1
            if approx:
                angle_rows.append(rng.uniform(0.0, 2.0 * np.pi, 12))
            else:
                matrices.append(haar_unitary(rng, 2 if at_edge else 4))
        pos = _advance(pos, kind, L, params.boundary)

    angles = np.asarray(angle_rows) if approx and angle_rows else \
        (np.empty((0, 12)) if approx else None)
    return CircuitRealization(params=params, circuit_index=circuit_index,
                              kinds=kinds, sites=sites, gate_index=gate_index,
                              angles=angles, matrices=matrices)


# -- serialization -----------------------------------------------------------

def _params_dict(params: CircuitParams) -> dict:
    return {
        "L": params.L,
        "p": params.p,
        "t_max": params.t_max,
        "boundary": params.boundary,
        "ensemble": params.ensemble,
        "master_seed": params.master_seed,
        "initial_position": params.initial_position,
    }


def to_json_dict(c: CircuitRealization) -> dict:
    """JSON record {version, circuit_index, params, steps[]}."""
    steps = []
    for k in range(c.t_max):
        if c.kinds[k] == CONTROL:
            steps.append({"kind": "control", "site": int(c.sites[k])})
            continue
        step = {"kind": "chaotic", "site": int(c.sites[k])}
        g = int(c.gate_index[k])
        if c.params.ensemble == "approx_haar_cz":
            step["angles"] = [float(x) for x in c.angles[g]]
            step["cz"] = bool(c.partner_site(k) >= 0)
        else:
            m = c.matrices[g]
            step["matrix_re"] = [[float(x) for x in row] for row in m.real]
            step["matrix_im"] = [[float(x) for x in row] for row in m.imag]
        steps.append(step)
    return {
        "version": FORMAT_VERSION,
        "circuit_index": c.circuit_index,
        "params": _params_dict(c.params),
        "steps": steps,
    }


def from_json_dict(record: dict) -> CircuitRealization:
    """Rebuild a CircuitRealization from its JSON record."""
    if record.get("version") != FORMAT_VERSION:
        raise UnsupportedVersionError(
            f"unsupported circuit record version {record.get('version')!r}")
    try:
        params = CircuitParams(**record["params"])
        steps = record["steps"]
        circuit_index = int(record["circuit_index"])
    except (KeyError, TypeError) as exc:
        raise FormatError(f"circuit record missing field: {exc}") from None

    t = len(steps)
    kinds = np.empty(t, dtype=np.uint8)
    sites = np.empty(t, dtype=np.int32)
    gate_index = np.full(t, -1, dtype=np.int32)
    approx = params.ensemble == "approx_haar_cz"
    angle_rows = []
    matrices = []
    n_gates = 0
    for k, step in enumerate(steps):
        try:
            sites[k] = int(step["site"])
            kind = step["kind"]
        except (KeyError, TypeError) as exc:
            raise FormatError(f"step {k} missing field: {exc}") from None
        if kind == "control":
            kinds[k] = CONTROL
        elif kind == "chaotic":
            kinds[k] = CHAOTIC
            gate_index[k] = n_gates
            n_gates += 1
            if approx:
                if "angles" not in step:
                    raise FormatError(f"step {k}: approx_haar_cz step without angles")
                row = np.asarray(step["angles"], dtype=np.float64)
                if row.shape != (12,):
                    raise FormatError(f"step {k}: expected 12 angles")
                angle_rows.append(row)
            else:
                if "matrix_re" not in step or "matrix_im" not in step:
                    raise FormatError(f"step {k}: exact_haar step without matrix")
                m = np.asarray(step["matrix_re"], dtype=np.float64) \
                    + 1j * np.asarray(step["matrix_im"], dtype=np.float64)
                if m.shape not in ((4, 4), (2, 2)):
                    raise FormatError(f"step {k}: bad matrix shape {m.shape}")
                _check_unitary(m)
                matrices.append(m)
        else:
            raise FormatError(f"step {k}: unknown kind {kind!r}")

    if t != params.t_max:
        raise FormatError(f"step count {t} does not match t_max {params.t_max}")
    angles = np.asarray(angle_rows) if approx and angle_rows else \
        (np.empty((0, 12)) if approx else None)
    return CircuitRealization(params=params, circuit_index=circuit_index,
                              kinds=kinds, sites=sites, gate_index=gate_index,
                              angles=angles, matrices=matrices)


def serialize_circuit(c: CircuitRealization) -> bytes:
    """Framed byte record: magic, version byte, payload length, JSON payload.

    Floats are serialized with shortest round-trip repr, so
    deserialize(serialize(c)) == c exactly and re-serialization is
    byte-identical.
    """
    payload = json.dumps(to_json_dict(c), separators=(",", ":")).encode("utf-8")
    return _HEADER.pack(_MAGIC, FORMAT_VERSION, len(payload)) + payload


def deserialize_circuit(data: bytes) -> CircuitRealization:
    """Inverse of serialize_circuit, with byte-offset error reporting."""
    if len(data) < 4 or data[:4] != _MAGIC:
        raise FormatError("bad magic, not a circuit record", offset=0)
    if len(data) < 5:
        raise FormatError("truncated header", offset=len(data))
    version = data[4]
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(f"unsupported format version {version}",
                                      offset=4)
    if len(data) < _HEADER.size:
        raise FormatError("truncated header", offset=len(data))
    _, _, n = _HEADER.unpack_from(data, 0)
    end = _HEADER.size + n
    if len(data) < end:
        raise FormatError("truncated payload", offset=len(data))
    if len(data) > end:
        raise FormatError("trailing bytes after payload", offset=end)
    try:
        record = json.loads(data[_HEADER.size:end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        pos = getattr(exc, "pos", getattr(exc, "start", 0))
        raise FormatError(f"payload is not valid JSON: {exc}",
                          offset=_HEADER.size + pos) from None
    return from_json_dict(record)
