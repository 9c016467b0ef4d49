"""Command-line orchestration: sweep, collapse, kl, probe.

Every verb writes machine-readable files (CSV/JSON, SVG for figures) and
prints a one-line summary per artifact; nothing is interactive.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import sweep as sweep_mod
from ._version import __version__
from .analysis import (CollapseInput, KLConfig, fit_collapse, frame_potential,
                       kl_divergence, lyapunov_estimate)
from .circuit import CircuitParams, sample_circuit
from .errors import CiptError, ParameterError, SchemaError
from .plots import plot_collapse, plot_kl_densities
from .statevector import run_circuit_shots
from .statmech2 import estimate_collision_probability
from .sweep import SweepSpec, read_csv, run_sweep

_OBSERVABLES = {
    # observable -> (y column, sigma column, beta multiplier)
    "mz_bar": ("mz_bar", "mz_bar_se", 1),
    "var_q": ("var_q", "var_q_se", 2),
}


def _write_json(path: Path, payload: dict):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")
    print(f"wrote {path}")


def _parse_p_values(args) -> list:
    if args.p is not None:
        return [float(v) for v in args.p]
    lo, hi, step = args.p_range
    if step <= 0 or hi < lo:
        raise ParameterError("bad p range")
    n = int(round((hi - lo) / step)) + 1
    values = [round(lo + i * step, 10) for i in range(n)]
    return [v for v in values if v <= hi + 1e-12]


def _cmd_sweep(args) -> int:
    record = {}
    if args.config:
        record = json.loads(Path(args.config).read_text())
    overrides = {
        "backend": args.backend, "L_values": args.L,
        "t_max_rule": args.t_rule, "t_max_fixed": args.t_max,
        "n_circuits": args.n_circuits, "n_shots": args.n_shots,
        "mode": args.mode, "ensemble": args.ensemble,
        "boundary": args.boundary, "p_e1": args.p_e1, "p_e2": args.p_e2,
        "master_seed": args.seed, "record_series": args.series or None,
        "n_words": args.n_words, "save_circuits": args.save_circuits,
        "out_dir": args.out_dir,
    }
    if args.p is not None or args.p_range is not None:
        overrides["p_values"] = _parse_p_values(args)
    for key, val in overrides.items():
        if val is not None:
            record[key] = val
    if "backend" not in record:
        raise ParameterError("backend is required (flag or config)")
    spec = SweepSpec.from_json_dict(record)
    info = run_sweep(spec, workers=args.workers,
                     log=(print if args.verbose else None))
    print(f"run {info.spec_hash}: {info.n_computed} of {info.n_tasks} tasks "
          f"computed (rest resumed) in {info.run_dir}")
    for name, path in info.csv_paths.items():
        print(f"wrote {path}")
    return 0


def _load_ensemble_rows(paths, expected_schema):
    rows = []
    for path in paths:
        schema, _, file_rows = read_csv(path)
        if schema != expected_schema:
            raise SchemaError(
                f"{path}: schema {schema!r}, expected {expected_schema!r}")
        rows.extend(file_rows)
    return rows


def _collapse_fixed(args, observable, ansatz):
    fixed = {}
    if args.fix_pc is not None:
        fixed["p_c"] = args.fix_pc
    if args.fix_nu is not None:
        fixed["nu"] = args.fix_nu
    if args.fix_z is not None:
        fixed["z"] = args.fix_z
    if args.fix_beta is not None:
        fixed["beta"] = args.fix_beta
    elif observable == "mz_bar" and not args.free_beta:
        # magnetization curves cross without a vertical rescale
        fixed["beta"] = 0.0
    return fixed


def _default_out(paths, stem) -> Path:
    base = Path(paths[0]).resolve().parent
    plots = base.parent / "plots"
    return (plots if plots.is_dir() else Path.cwd()) / stem


def _cmd_collapse(args) -> int:
    y_col, s_col, mult = _OBSERVABLES[args.observable]
    if args.ansatz == "static":
        rows = _load_ensemble_rows(args.stats, "ensemble_stats.v1")
        q = [float(r["p"]) for r in rows]
        L = [int(r["L"]) for r in rows]
        y = [float(r[y_col]) for r in rows]
        sig = [float(r[s_col]) for r in rows]
        window = tuple(args.window) if args.window else (0.4, 0.6)
        data = CollapseInput(q=q, L=L, y=y, sigma=sig, ansatz="static",
                             beta_multiplier=mult, window=window)
        guess = {"p_c": args.guess_pc, "nu": args.guess_nu,
                 "beta": args.guess_beta}
    else:
        rows = _load_ensemble_rows(args.stats, "ensemble_series.v1")
        base = {}
        if args.observable == "mz_bar":
            for r in rows:
                if int(r["step"]) == 0:
                    base[(int(r["L"]), r["p"])] = float(r["mz_bar"])
        q, L, y, sig = [], [], [], []
        for r in rows:
            step = int(r["step"])
            if step == 0:
                continue
            size = int(r["L"])
            q.append(float(step))
            L.append(size)
            y.append(float(r[y_col]) - base.get((size, r["p"]), 0.0))
            sig.append(float(r[s_col]))
        if args.window:
            window = tuple(args.window)
        else:
            window = (1.0, 1.0 if args.full_early else args.early_frac)
        data = CollapseInput(q=q, L=L, y=y, sigma=sig, ansatz="dynamic",
                             beta_multiplier=mult, window=window,
                             window_scale="per_size")
        guess = {"z": args.guess_z, "beta": args.guess_beta}

    fixed = _collapse_fixed(args, args.observable, args.ansatz)
    fit = fit_collapse(data, guess, fixed)
    out = Path(args.out) if args.out else _default_out(
        args.stats, f"collapse_{args.observable}_{args.ansatz}")
    _write_json(out.with_suffix(".json"), fit.to_json_dict())
    plot_collapse(data.q, data.L, data.y, data.sigma, fit,
                  out.with_suffix(".svg"), beta_multiplier=mult,
                  xlabel="p" if args.ansatz == "static" else "t",
                  ylabel=args.observable)
    print(f"wrote {out.with_suffix('.svg')}")
    shown = {k: v for k, v in fit.params.items() if v is not None}
    print(f"fit: {shown} chi2_nu={fit.chi2_nu:.4g} n={fit.n_points}")
    return 0


def _kl_samples(path, L, p):
    schema, _, rows = read_csv(path)
    if schema != "circuit_stats.v1":
        raise SchemaError(f"{path}: schema {schema!r}, "
                          "expected 'circuit_stats.v1'")
    vals = [float(r["quantum_var"]) for r in rows
            if int(r["L"]) == L and abs(float(r["p"]) - p) <= 1e-9]
    if not vals:
        raise ParameterError(f"{path}: no rows at L={L}, p={p}")
    return np.array(vals)


def _cmd_kl(args) -> int:
    a = _kl_samples(args.stats_a, args.L, args.p)
    b = _kl_samples(args.stats_b, args.L, args.p)
    config = KLConfig(n_bootstrap=args.bootstrap,
                      laplace_smoothing=args.laplace, seed=args.seed)
    res = kl_divergence(a, b, config)
    out = Path(args.out) if args.out else _default_out(
        [args.stats_a], f"kl_L{args.L}_p{args.p}")
    payload = {"L": args.L, "p": args.p, "kl": res.kl, "stderr": res.stderr,
               "infinite": res.infinite, "w_p": res.w_p, "w_q": res.w_q,
               "d_cont": res.d_cont, "n_p": res.n_p, "n_q": res.n_q,
               "n_infinite_replicates": res.n_infinite_replicates}
    _write_json(out.with_suffix(".json"), payload)
    plot_kl_densities(a, b, out.with_suffix(".svg"),
                      label_a=Path(args.stats_a).stem,
                      label_b=Path(args.stats_b).stem)
    print(f"wrote {out.with_suffix('.svg')}")
    print(f"kl={res.kl:.6g} stderr={res.stderr:.3g} infinite={res.infinite}")
    return 0


def _cmd_probe(args) -> int:
    out = Path(args.out) if args.out else Path(f"probe_{args.kind}.json")
    if args.kind == "frame-potential":
        est, err = frame_potential(args.ensemble, k=args.k,
                                   n_pairs=args.n_pairs, seed=args.seed)
        payload = {"probe": "frame-potential", "ensemble": args.ensemble,
                   "k": args.k, "n_pairs": args.n_pairs, "estimate": est,
                   "stderr": err}
        print(f"frame potential k={args.k} {args.ensemble}: "
              f"{est:.4f} +- {err:.4f}")
    elif args.kind == "lyapunov":
        lam, err = lyapunov_estimate(args.p, n_steps=args.n_steps,
                                     n_trajectories=args.n_traj,
                                     precision_bits=args.bits,
                                     seed=args.seed)
        payload = {"probe": "lyapunov", "p": args.p, "lambda": lam,
                   "stderr": err, "lambda_over_log2": lam / np.log(2.0),
                   "n_steps": args.n_steps, "n_trajectories": args.n_traj}
        print(f"lyapunov p={args.p}: lambda/log2 = {lam / np.log(2.0):.4f} "
              f"+- {err / np.log(2.0):.4f}")
    elif args.kind == "collision":
        params = CircuitParams(L=args.L, p=args.p, t_max=args.t_max,
                               ensemble="exact_haar",
                               master_seed=args.seed)
        est = estimate_collision_probability(params, args.n_circuits,
                                             args.n_words,
                                             rel_tol=args.rel_tol)
        payload = {"probe": "collision", "L": args.L, "p": args.p,
                   "t": params.t_max, "cp_mean": est.cp_mean,
                   "cp_stderr": est.cp_stderr,
                   "n_circuits": est.n_circuits, "n_words": est.n_words}
        print(f"collision probability L={args.L} p={args.p}: "
              f"{est.cp_mean:.6g} +- {est.cp_stderr:.2g}")
    else:  # entropy-profile
        profile = []
        for p in args.p:
            params = CircuitParams(L=args.L, p=p, t_max=args.t_max,
                                   master_seed=args.seed)
            ents = []
            for ci in range(args.n_circuits):
                c = sample_circuit(params, ci)
                batch = run_circuit_shots(c, args.n_shots, mode="bitstring",
                                          entropy_final=True)
                ents.extend(batch.entropy.tolist())
            ents = np.array(ents)
            profile.append({"p": p, "entropy_mean": float(ents.mean()),
                            "entropy_se": float(ents.std(ddof=1)
                                                / np.sqrt(len(ents)))})
            print(f"entropy L={args.L} p={p}: {profile[-1]['entropy_mean']:.4f}"
                  f" +- {profile[-1]['entropy_se']:.4f}")
        payload = {"probe": "entropy-profile", "L": args.L,
                   "n_circuits": args.n_circuits, "n_shots": args.n_shots,
                   "profile": profile}
    _write_json(out.with_suffix(".json"), payload)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="cipt",
        description="Monte Carlo simulator and analysis pipeline for "
                    "measurement-and-feedback random circuits")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    sw = sub.add_parser("sweep", help="run or resume a (backend, L, p) grid")
    sw.add_argument("--config", help="JSON file mirroring SweepSpec")
    sw.add_argument("--backend", choices=sweep_mod.BACKENDS)
    sw.add_argument("--L", type=int, nargs="+")
    group = sw.add_mutually_exclusive_group()
    group.add_argument("--p", type=float, nargs="+")
    group.add_argument("--p-range", type=float, nargs=3,
                       metavar=("LO", "HI", "STEP"))
    sw.add_argument("--t-rule", choices=sweep_mod.T_MAX_RULES)
    sw.add_argument("--t-max", type=int)
    sw.add_argument("--n-circuits", type=int)
    sw.add_argument("--n-shots", type=int)
    sw.add_argument("--mode", choices=("bitstring", "expectation"))
    sw.add_argument("--ensemble", choices=("approx_haar_cz", "exact_haar"))
    sw.add_argument("--boundary", choices=("periodic", "open"))
    sw.add_argument("--p-e1", type=float)
    sw.add_argument("--p-e2", type=float)
    sw.add_argument("--seed", type=int)
    sw.add_argument("--series", action="store_true",
                    help="record per-step time series")
    sw.add_argument("--n-words", type=int)
    sw.add_argument("--save-circuits", choices=("auto", "always", "never"))
    sw.add_argument("--out-dir")
    sw.add_argument("--workers", type=int, default=None)
    sw.add_argument("--verbose", action="store_true")
    sw.set_defaults(func=_cmd_sweep)

    co = sub.add_parser("collapse", help="finite-size-scaling fit and plot")
    co.add_argument("--stats", nargs="+", required=True,
                    help="ensemble_stats (static) or ensemble_series "
                         "(dynamic) CSVs")
    co.add_argument("--observable", choices=sorted(_OBSERVABLES),
                    default="mz_bar")
    co.add_argument("--ansatz", choices=("static", "dynamic"),
                    default="static")
    co.add_argument("--window", type=float, nargs=2, metavar=("LO", "HI"))
    co.add_argument("--early-frac", type=float, default=0.6,
                    help="dynamic window upper cut as a fraction of L")
    co.add_argument("--full-early", action="store_true",
                    help="use the wider early-time window t <= L")
    co.add_argument("--fix-pc", type=float)
    co.add_argument("--fix-nu", type=float)
    co.add_argument("--fix-beta", type=float)
    co.add_argument("--fix-z", type=float)
    co.add_argument("--free-beta", action="store_true",
                    help="fit beta for mz_bar instead of pinning it to 0")
    co.add_argument("--guess-pc", type=float, default=0.5)
    co.add_argument("--guess-nu", type=float, default=1.0)
    co.add_argument("--guess-beta", type=float, default=1.0)
    co.add_argument("--guess-z", type=float, default=2.0)
    co.add_argument("--out", help="output path prefix (.json/.svg added)")
    co.set_defaults(func=_cmd_collapse)

    kl = sub.add_parser("kl", help="KL divergence between two runs' "
                                   "fluctuation samples")
    kl.add_argument("--stats-a", required=True, help="circuit_stats CSV")
    kl.add_argument("--stats-b", required=True, help="circuit_stats CSV")
    kl.add_argument("--L", type=int, required=True)
    kl.add_argument("--p", type=float, required=True)
    kl.add_argument("--bootstrap", type=int, default=100)
    kl.add_argument("--laplace", action="store_true")
    kl.add_argument("--seed", type=int, default=0)
    kl.add_argument("--out")
    kl.set_defaults(func=_cmd_kl)

    pr = sub.add_parser("probe", help="standalone diagnostics")
    prsub = pr.add_subparsers(dest="kind", required=True)

    fp = prsub.add_parser("frame-potential")
    fp.add_argument("--ensemble", choices=("approx_haar_cz", "exact_haar"),
                    default="approx_haar_cz")
    fp.add_argument("--k", type=int, default=2)
    fp.add_argument("--n-pairs", type=int, default=100_000)
    fp.add_argument("--seed", type=int, default=0)
    fp.add_argument("--out")
    fp.set_defaults(func=_cmd_probe)

    ly = prsub.add_parser("lyapunov")
    ly.add_argument("--p", type=float, required=True)
    ly.add_argument("--n-steps", type=int, default=4000)
    ly.add_argument("--n-traj", type=int, default=64)
    ly.add_argument("--bits", type=int, default=128)
    ly.add_argument("--seed", type=int, default=0)
    ly.add_argument("--out")
    ly.set_defaults(func=_cmd_probe)

    cp = prsub.add_parser("collision")
    cp.add_argument("--L", type=int, required=True)
    cp.add_argument("--p", type=float, required=True)
    cp.add_argument("--t-max", type=int, default=None)
    cp.add_argument("--n-circuits", type=int, default=40)
    cp.add_argument("--n-words", type=int, default=4000)
    cp.add_argument("--rel-tol", type=float, default=None)
    cp.add_argument("--seed", type=int, default=0)
    cp.add_argument("--out")
    cp.set_defaults(func=_cmd_probe)

    en = prsub.add_parser("entropy-profile")
    en.add_argument("--L", type=int, default=12)
    en.add_argument("--p", type=float, nargs="+", default=[0.1, 0.4, 0.7])
    en.add_argument("--t-max", type=int, default=None)
    en.add_argument("--n-circuits", type=int, default=5)
    en.add_argument("--n-shots", type=int, default=20)
    en.add_argument("--seed", type=int, default=0)
    en.add_argument("--out")
    en.set_defaults(func=_cmd_probe)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CiptError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
