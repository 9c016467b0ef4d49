"""Resumable seeded parameter sweeps with a content-addressed output tree.

A sweep is a grid over (L, p, circuit_index). Each grid cell is one task:
sample the circuit, run every shot, reduce to per-circuit statistics, and
persist the result as one JSON file under stats/tasks/. The run directory
is named by a hash of the canonical sweep spec, so re-invoking with the
same spec resumes: tasks whose files exist and match the manifest hash are
never recomputed, and the final CSVs are always rebuilt from the task files
in sorted grid order. That makes the CSV and task-file bytes a pure
function of (spec, seed, kernel build) no matter how many workers ran or in
what order tasks finished. The manifest additionally records wall-clock
timestamps, which are naturally excluded from that guarantee.

Workers (CIPT_WORKERS, default 1) compute task payloads; only the parent
process writes files, each via write-to-temp-then-rename.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass, field, fields
from multiprocessing import get_context
from pathlib import Path

import numpy as np

from ._version import __version__
from .circuit import (BOUNDARIES, ENSEMBLES, CircuitParams, sample_circuit,
                      serialize_circuit)
from .classical import NoiseParams, dephasing_run_batch, statmech1_run_batch
from .errors import CapacityError, ParameterError, SchemaError
from .observables import (CircuitStats, circuit_stats_arrays, ensemble_stats,
                          ensemble_series_stats)
from .statevector import MAX_QUBITS, run_circuit_shots
from .statmech2 import circuit_log_estimates, _log_mean_exp

BACKENDS = ("statevector", "dephasing", "statmech1", "statmech1-noisy",
            "statmech2")
T_MAX_RULES = ("half_square", "square", "linear5", "fixed")
TASK_SCHEMA = "circuit_task.v1"
MANIFEST_SCHEMA = "manifest.v1"
#: auto circuit saving switches off above this estimated total size
_SAVE_BUDGET_BYTES = 64 * 1024 * 1024


@dataclass(frozen=True)
class SweepSpec:
    backend: str
    L_values: tuple
    p_values: tuple
    t_max_rule: str = "half_square"
    t_max_fixed: int | None = None
    n_circuits: int = 50
    n_shots: int | None = None
    mode: str = "bitstring"
    ensemble: str = "approx_haar_cz"
    boundary: str = "periodic"
    p_e1: float = 0.0
    p_e2: float = 0.0
    master_seed: int = 0
    record_series: bool = False
    n_words: int = 2000
    save_circuits: str = "auto"
    out_dir: str = "runs"

    def __post_init__(self):
        object.__setattr__(self, "L_values",
                           tuple(int(v) for v in self.L_values))
        object.__setattr__(self, "p_values",
                           tuple(float(v) for v in self.p_values))
        if self.backend not in BACKENDS:
            raise ParameterError(f"unknown backend {self.backend!r}")
        if not self.L_values or not self.p_values:
            raise ParameterError("empty L or p grid")
        if any(L < 2 for L in self.L_values):
            raise ParameterError("all L must be >= 2")
        if any(not 0.0 <= p <= 1.0 for p in self.p_values):
            raise ParameterError("all p must lie in [0, 1]")
        if self.backend == "statevector":
            too_big = [L for L in self.L_values if L > MAX_QUBITS]
            if too_big:
                raise CapacityError(
                    f"statevector backend caps at L={MAX_QUBITS}, "
                    f"got {too_big}")
        if self.t_max_rule not in T_MAX_RULES:
            raise ParameterError(f"unknown t_max rule {self.t_max_rule!r}")
        if self.t_max_rule == "fixed" and (self.t_max_fixed is None
                                           or self.t_max_fixed < 1):
            raise ParameterError("fixed t_max rule needs t_max_fixed >= 1")
        if self.n_circuits < 1 or (self.n_shots is not None
                                   and self.n_shots < 2):
            raise ParameterError("need n_circuits >= 1 and n_shots >= 2")
        if self.ensemble not in ENSEMBLES:
            raise ParameterError(f"unknown ensemble {self.ensemble!r}")
        if self.boundary not in BOUNDARIES:
            raise ParameterError(f"unknown boundary {self.boundary!r}")
        if self.backend == "statmech2" and self.ensemble != "exact_haar":
            raise ParameterError(
                "the second-moment word model assumes exact-Haar gates; "
                "set ensemble='exact_haar'")
        NoiseParams(self.p_e1, self.p_e2)  # range validation
        if (self.p_e1 or self.p_e2) and self.backend != "statmech1-noisy":
            raise ParameterError(
                "depolarizing rates apply to the statmech1-noisy backend")
        if self.record_series and self.backend in ("statevector",
                                                   "statmech2"):
            raise ParameterError(
                "time-series recording is supported on the bitstring "
                "backends (statmech1 family, dephasing)")
        if self.save_circuits not in ("auto", "always", "never"):
            raise ParameterError("save_circuits must be auto/always/never")
        if self.master_seed < 0:
            raise ParameterError("master_seed must be non-negative")

    @property
    def effective_n_shots(self) -> int:
        if self.n_shots is not None:
            return self.n_shots
        return 1000 if self.backend == "statevector" else 10000

    def t_max(self, L: int) -> int:
        if self.t_max_rule == "half_square":
            return (L * L) // 2
        if self.t_max_rule == "square":
            return L * L
        if self.t_max_rule == "linear5":
            return 5 * L
        return int(self.t_max_fixed)

    def noise(self) -> NoiseParams:
        return NoiseParams(self.p_e1, self.p_e2)

    def circuit_params(self, L: int, p: float) -> CircuitParams:
        return CircuitParams(L=L, p=p, t_max=self.t_max(L),
                             boundary=self.boundary, ensemble=self.ensemble,
                             master_seed=self.master_seed)

    def to_json_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out

    def spec_hash(self) -> str:
        # identifies the computation, not its location: out_dir and the
        # save_circuits policy do not change any computed number
        record = self.to_json_dict()
        del record["out_dir"]
        del record["save_circuits"]
        blob = json.dumps(record, sort_keys=True,
                          separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()[:12]

    @classmethod
    def from_json_dict(cls, record: dict) -> "SweepSpec":
        names = {f.name for f in fields(cls)}
        unknown = set(record) - names
        if unknown:
            raise SchemaError(f"unknown sweep spec fields {sorted(unknown)}")
        kwargs = dict(record)
        for key in ("L_values", "p_values"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        return cls(**kwargs)


@dataclass
class RunInfo:
    run_dir: Path
    spec_hash: str
    n_tasks: int
    n_computed: int
    csv_paths: dict = field(default_factory=dict)


def _task_id(L: int, p_index: int, circuit_index: int) -> str:
    return f"L{L}_pi{p_index}_c{circuit_index}"


def _atomic_write(path: Path, data: bytes):
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def _json_bytes(payload: dict) -> bytes:
    return (json.dumps(payload, sort_keys=True, separators=(",", ":"))
            + "\n").encode()


def run_task(spec: SweepSpec, L: int, p_index: int, circuit_index: int,
             want_circuit: bool = False):
    """Compute one grid cell. Returns (task_id, payload, circuit_bytes).

    Initial states: the statevector and dephasing backends start from the
    all-ones product state (the experiment's initialization); the statmech1
    family starts from per-shot uniform random bits.
    """
    p = spec.p_values[p_index]
    params = spec.circuit_params(L, p)
    c = sample_circuit(params, circuit_index)
    payload = {"schema": TASK_SCHEMA, "task_id": _task_id(L, p_index,
                                                          circuit_index),
               "L": L, "p": p, "p_index": p_index, "t": params.t_max,
               "circuit_index": circuit_index, "backend": spec.backend}
    n = spec.effective_n_shots

    if spec.backend == "statmech2":
        logs = circuit_log_estimates(c, spec.n_words)
        payload["cp_circuit"] = float(np.exp(_log_mean_exp(logs)))
        payload["n_words"] = spec.n_words
        return payload["task_id"], payload, None

    if spec.backend == "statevector":
        batch = run_circuit_shots(c, n, mode=spec.mode)
        s1 = s2 = None
    elif spec.backend == "dephasing":
        batch, _, s1, s2 = dephasing_run_batch(
            c, n, init_bits=np.ones(L, dtype=np.uint8),
            record_series=spec.record_series)
    else:
        batch, _, s1, s2 = statmech1_run_batch(
            c, n, noise=spec.noise(), record_series=spec.record_series)
    stats = circuit_stats_arrays(spec.backend, batch.mode, L, p,
                                 params.t_max, circuit_index,
                                 batch.mz, batch.mz_sq)
    payload.update(mode=stats.mode, n_shots=n, mz_mean=stats.mz_mean,
                   mz_second=stats.mz_second,
                   quantum_var=stats.quantum_var,
                   mz_shot_var=stats.mz_shot_var,
                   quantum_var_sampling_var=stats.quantum_var_sampling_var)
    if spec.record_series and s1 is not None:
        payload["s1"] = [int(v) for v in s1]
        payload["s2"] = [int(v) for v in s2]

    circuit_bytes = serialize_circuit(c) if want_circuit else None
    return payload["task_id"], payload, circuit_bytes


def _estimated_circuit_bytes(spec: SweepSpec) -> int:
    # JSON size per step: 12 angle floats (~20 bytes each) for the product
    # ensemble, a 32-entry complex matrix for exact Haar
    per_step = 760 if spec.ensemble == "exact_haar" else 300
    total = 0
    for L in spec.L_values:
        total += spec.t_max(L) * per_step * spec.n_circuits
    return total * len(spec.p_values)


def _run_task_star(args):
    return run_task(*args)


class SweepRun:
    """Materialized run directory for a spec: paths, manifest, task state."""

    def __init__(self, spec: SweepSpec):
        self.spec = spec
        self.spec_hash = spec.spec_hash()
        self.run_dir = Path(spec.out_dir) / self.spec_hash
        self.tasks_dir = self.run_dir / "stats" / "tasks"
        self.circuits_dir = self.run_dir / "circuits"
        self.stats_dir = self.run_dir / "stats"
        self.plots_dir = self.run_dir / "plots"
        self.manifest_path = self.run_dir / "manifest.json"

    def grid(self):
        for L in self.spec.L_values:
            for p_index in range(len(self.spec.p_values)):
                for ci in range(self.spec.n_circuits):
                    yield L, p_index, ci

    def task_path(self, tid: str) -> Path:
        return self.tasks_dir / f"{tid}.json"

    def _task_done(self, tid: str) -> bool:
        path = self.task_path(tid)
        if not path.exists():
            return False
        try:
            payload = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError):
            return False
        return (payload.get("schema") == TASK_SCHEMA
                and payload.get("manifest") == self.spec_hash)

    def _write_manifest(self, completed: dict, created_at: str):
        manifest = {
            "schema": MANIFEST_SCHEMA,
            "spec": self.spec.to_json_dict(),
            "spec_hash": self.spec_hash,
            "code_version": __version__,
            "created_at": created_at,
            "updated_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
            "seed_scheme": {
                "circuit_structure": "SeedSequence(master_seed, 1, circuit_index)",
                "sv_measurement": "SeedSequence(master_seed, 2, circuit_index, shot)",
                "statmech1_stream": "derive_key(master_seed, 3, circuit_index)",
                "dephasing_stream": "derive_key(master_seed, 4, circuit_index)",
                "statmech2_stream": "derive_key(master_seed, 5, circuit_index)",
            },
            "tasks": completed,
        }
        _atomic_write(self.manifest_path,
                      json.dumps(manifest, sort_keys=True, indent=1).encode())

    def _load_created_at(self) -> str:
        if self.manifest_path.exists():
            try:
                old = json.loads(self.manifest_path.read_text())
                if old.get("spec_hash") == self.spec_hash:
                    return old.get("created_at", "")
            except (OSError, json.JSONDecodeError):
                pass
        return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())

    def _save_circuits_resolved(self) -> bool:
        if self.spec.save_circuits == "always":
            return True
        if self.spec.save_circuits == "never":
            return False
        return (self.spec.backend != "statmech2"
                and _estimated_circuit_bytes(self.spec) <= _SAVE_BUDGET_BYTES)


def run_sweep(spec: SweepSpec, workers: int | None = None,
              log=None) -> RunInfo:
    """Execute (or resume) the sweep and rebuild its CSV outputs."""
    run = SweepRun(spec)
    for d in (run.tasks_dir, run.circuits_dir, run.plots_dir):
        d.mkdir(parents=True, exist_ok=True)
    created_at = run._load_created_at()

    all_tasks = list(run.grid())
    pending = [(L, pi, ci) for (L, pi, ci) in all_tasks
               if not run._task_done(_task_id(L, pi, ci))]
    save_circ = run._save_circuits_resolved()

    if workers is None:
        workers = int(os.environ.get("CIPT_WORKERS", "1"))

    def commit(tid, payload, circuit_bytes):
        payload = dict(payload)
        payload["manifest"] = run.spec_hash
        _atomic_write(run.task_path(tid), _json_bytes(payload))
        if save_circ and circuit_bytes is not None:
            _atomic_write(run.circuits_dir / f"{tid}.bin", circuit_bytes)

    if workers > 1 and len(pending) > 1:
        ctx = get_context("spawn")
        with ctx.Pool(workers) as pool:
            args = [(spec, L, pi, ci, save_circ) for (L, pi, ci) in pending]
            for tid, payload, cbytes in pool.imap_unordered(
                    _run_task_star, args):
                commit(tid, payload, cbytes)
                if log:
                    log(f"task {tid} done")
    else:
        for (L, pi, ci) in pending:
            tid, payload, cbytes = run_task(spec, L, pi, ci, save_circ)
            commit(tid, payload, cbytes)
            if log:
                log(f"task {tid} done")

    csv_paths = _rebuild_outputs(run)
    completed = {_task_id(L, pi, ci): "done" for (L, pi, ci) in all_tasks}
    run._write_manifest(completed, created_at)
    return RunInfo(run_dir=run.run_dir, spec_hash=run.spec_hash,
                   n_tasks=len(all_tasks), n_computed=len(pending),
                   csv_paths=csv_paths)


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)  # shortest exact round-trip form
    return str(v)


def write_csv(path: Path, schema: str, manifest_hash: str, columns, rows):
    """CSV with a leading `# schema=... manifest=...` comment line."""
    lines = [f"# schema={schema} manifest={manifest_hash}",
             ",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt(row[c]) for c in columns))
    _atomic_write(path, ("\n".join(lines) + "\n").encode())
    return path


def read_csv(path) -> tuple[str, str, list]:
    """(schema, manifest_hash, rows as dicts) from a cipt CSV."""
    text = Path(path).read_text()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("# schema="):
        raise SchemaError(f"{path}: missing schema header line")
    head = lines[0][2:].split()
    meta = dict(kv.split("=", 1) for kv in head if "=" in kv)
    schema = meta.get("schema", "")
    manifest = meta.get("manifest", "")
    columns = lines[1].split(",")
    rows = []
    for ln in lines[2:]:
        parts = ln.split(",")
        if len(parts) != len(columns):
            raise SchemaError(f"{path}: ragged CSV row")
        rows.append(dict(zip(columns, parts)))
    return schema, manifest, rows


CIRCUIT_COLUMNS = ("backend", "mode", "L", "p", "t", "circuit_index",
                   "n_shots", "mz_mean", "mz_second", "quantum_var",
                   "mz_shot_var", "quantum_var_sampling_var")
ENSEMBLE_COLUMNS = ("backend", "mode", "L", "p", "t", "mz_bar", "mz_bar_se",
                    "var_q", "var_q_se", "var_circuit", "n_circuits",
                    "n_shots", "var_q_debiased", "var_circuit_se",
                    "zero_frac")
SERIES_COLUMNS = ("backend", "mode", "L", "p", "step", "mz_bar", "mz_bar_se",
                  "var_q", "var_q_se", "var_circuit", "zero_frac")
CP_COLUMNS = ("L", "p", "cp_mean", "cp_stderr", "n_circuits", "n_words")


def _load_tasks_sorted(run: SweepRun) -> list:
    payloads = []
    for (L, pi, ci) in run.grid():
        path = run.task_path(_task_id(L, pi, ci))
        payload = json.loads(path.read_text())
        payloads.append(payload)
    return payloads


def _rebuild_outputs(run: SweepRun) -> dict:
    spec = run.spec
    payloads = _load_tasks_sorted(run)
    paths = {}
    h = run.spec_hash

    if spec.backend == "statmech2":
        rows = []
        for (L, pi) in [(L, pi) for L in spec.L_values
                        for pi in range(len(spec.p_values))]:
            group = [t for t in payloads
                     if t["L"] == L and t["p_index"] == pi]
            cps = np.array([t["cp_circuit"] for t in group])
            stderr = (float(cps.std(ddof=1) / np.sqrt(len(cps)))
                      if len(cps) > 1 else float("nan"))
            rows.append({"L": L, "p": spec.p_values[pi],
                         "cp_mean": float(cps.mean()), "cp_stderr": stderr,
                         "n_circuits": len(cps), "n_words": spec.n_words})
        paths["statmech2_cp"] = write_csv(
            run.stats_dir / "statmech2_cp.csv", "statmech2_cp.v1", h,
            CP_COLUMNS, rows)
        return paths

    circuit_rows = []
    for t in payloads:
        row = {c: t[c] for c in CIRCUIT_COLUMNS}
        circuit_rows.append(row)
    paths["circuit_stats"] = write_csv(
        run.stats_dir / "circuit_stats.csv", "circuit_stats.v1", h,
        CIRCUIT_COLUMNS, circuit_rows)

    ens_rows = []
    for L in spec.L_values:
        for pi, p in enumerate(spec.p_values):
            group = [t for t in payloads
                     if t["L"] == L and t["p_index"] == pi]
            if len(group) < 2:
                continue
            stats = [CircuitStats(
                backend=t["backend"], mode=t["mode"], L=t["L"], p=t["p"],
                t=t["t"], circuit_index=t["circuit_index"],
                n_shots=t["n_shots"], mz_mean=t["mz_mean"],
                mz_second=t["mz_second"], quantum_var=t["quantum_var"],
                mz_shot_var=t["mz_shot_var"],
                quantum_var_sampling_var=t["quantum_var_sampling_var"])
                for t in group]
            e = ensemble_stats(stats)
            ens_rows.append({c: getattr(e, c) for c in ENSEMBLE_COLUMNS})
    paths["ensemble_stats"] = write_csv(
        run.stats_dir / "ensemble_stats.csv", "ensemble_stats.v1", h,
        ENSEMBLE_COLUMNS, ens_rows)

    if spec.record_series:
        series_rows = []
        for L in spec.L_values:
            for pi, p in enumerate(spec.p_values):
                group = [t for t in payloads
                         if t["L"] == L and t["p_index"] == pi]
                series = [(np.array(t["s1"], dtype=np.int64),
                           np.array(t["s2"], dtype=np.int64))
                          for t in group if "s1" in t]
                if len(series) < 2:
                    continue
                agg = ensemble_series_stats(series, L,
                                            spec.effective_n_shots)
                backend = group[0]["backend"]
                mode = group[0]["mode"]
                for step in range(len(agg["mz_bar"])):
                    series_rows.append({
                        "backend": backend, "mode": mode, "L": L, "p": p,
                        "step": step,
                        "mz_bar": float(agg["mz_bar"][step]),
                        "mz_bar_se": float(agg["mz_bar_se"][step]),
                        "var_q": float(agg["var_q"][step]),
                        "var_q_se": float(agg["var_q_se"][step]),
                        "var_circuit": float(agg["var_circuit"][step]),
                        "zero_frac": float(agg["zero_frac"][step])})
        paths["ensemble_series"] = write_csv(
            run.stats_dir / "ensemble_series.csv", "ensemble_series.v1", h,
            SERIES_COLUMNS, series_rows)
    return paths
