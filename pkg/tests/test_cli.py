import json
import math

import pytest

from cipt.cli import main


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    from cipt import __version__
    assert __version__ in capsys.readouterr().out


def _run_small_sweep(tmp_path, extra=()):
    args = ["sweep", "--backend", "statmech1", "--L", "8", "16",
            "--p-range", "0.4", "0.6", "0.1", "--t-rule", "fixed",
            "--t-max", "12", "--n-circuits", "4", "--n-shots", "300",
            "--seed", "9", "--out-dir", str(tmp_path / "runs")]
    args.extend(extra)
    assert main(args) == 0
    run_dirs = list((tmp_path / "runs").iterdir())
    assert len(run_dirs) == 1
    return run_dirs[0]


def test_sweep_then_collapse(tmp_path):
    run_dir = _run_small_sweep(tmp_path)
    stats = run_dir / "stats" / "ensemble_stats.csv"
    assert stats.exists()

    out = tmp_path / "fit"
    code = main(["collapse", "--stats", str(stats), "--observable", "mz_bar",
                 "--window", "0.4", "0.6", "--guess-pc", "0.5",
                 "--guess-nu", "1.0", "--out", str(out)])
    assert code == 0
    fit = json.loads(out.with_suffix(".json").read_text())
    assert set(fit["params"]) == {"p_c", "nu", "beta", "z"}
    assert fit["params"]["beta"] == 0.0  # pinned for mz_bar by default
    assert out.with_suffix(".svg").exists()


def test_sweep_config_file(tmp_path):
    cfg = tmp_path / "spec.json"
    cfg.write_text(json.dumps({
        "backend": "dephasing", "L_values": [6], "p_values": [0.5],
        "t_max_rule": "fixed", "t_max_fixed": 8, "n_circuits": 2,
        "n_shots": 100, "master_seed": 1,
        "out_dir": str(tmp_path / "runs")}))
    assert main(["sweep", "--config", str(cfg)]) == 0
    assert (tmp_path / "runs").exists()


def test_kl_missing_point_errors(tmp_path, capsys):
    run_dir = _run_small_sweep(tmp_path)
    stats = str(run_dir / "stats" / "circuit_stats.csv")
    code = main(["kl", "--stats-a", stats, "--stats-b", stats,
                 "--L", "8", "--p", "0.9"])
    assert code == 2
    assert "error:" in capsys.readouterr().err


def test_kl_runs_on_matching_rows(tmp_path):
    run_dir = _run_small_sweep(tmp_path)
    stats = str(run_dir / "stats" / "circuit_stats.csv")
    out = tmp_path / "kl"
    code = main(["kl", "--stats-a", stats, "--stats-b", stats,
                 "--L", "8", "--p", "0.5", "--bootstrap", "5",
                 "--out", str(out)])
    assert code == 0
    payload = json.loads(out.with_suffix(".json").read_text())
    assert math.isfinite(payload["kl"])  # value itself is junk at n=4
    assert payload["n_p"] == 4
    assert out.with_suffix(".svg").exists()


def test_probe_lyapunov(tmp_path):
    out = tmp_path / "ly"
    code = main(["probe", "lyapunov", "--p", "0.25", "--n-steps", "400",
                 "--n-traj", "16", "--out", str(out)])
    assert code == 0
    payload = json.loads(out.with_suffix(".json").read_text())
    assert set(payload) >= {"p", "lambda", "stderr", "lambda_over_log2"}
    expect = math.log(2.0) * (1 - 2 * 0.25)
    assert abs(payload["lambda"] - expect) < 5 * payload["stderr"]


def test_probe_collision(tmp_path):
    out = tmp_path / "cp"
    code = main(["probe", "collision", "--L", "4", "--p", "1.0",
                 "--t-max", "8", "--n-circuits", "3", "--n-words", "50",
                 "--out", str(out)])
    assert code == 0
    payload = json.loads(out.with_suffix(".json").read_text())
    assert payload["cp_mean"] == pytest.approx(1.0)


def test_bad_arguments_exit_2(tmp_path, capsys):
    code = main(["sweep", "--backend", "statmech1", "--L", "8",
                 "--p", "1.7", "--out-dir", str(tmp_path)])
    assert code == 2
    assert "error:" in capsys.readouterr().err


def test_collapse_rejects_wrong_schema(tmp_path, capsys):
    run_dir = _run_small_sweep(tmp_path)
    circuit_csv = run_dir / "stats" / "circuit_stats.csv"
    code = main(["collapse", "--stats", str(circuit_csv)])
    assert code == 2
    assert "error:" in capsys.readouterr().err
