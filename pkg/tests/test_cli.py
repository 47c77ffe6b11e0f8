import csv
import hashlib
import json
import math
import os

import numpy as np
import pytest

from kickedgas import cli
from kickedgas import predictions as pred


def write_config(path, **kw):
    base = {"gamma_star": 1.0, "kick": "delta", "lambda": 2.0, "ns": 64,
            "horizon": 6, "nr": 4, "seed": 11}
    base.update(kw)
    with open(path, "w") as fh:
        json.dump(base, fh)
    return base


def test_run_writes_artifacts_and_manifest(tmp_path):
    cfg = tmp_path / "cfg.json"
    write_config(cfg, hist=[[1, 6]], snapshots=[0, 6])
    out = tmp_path / "out"
    code = cli.main(["run", "--config", str(cfg), "--out", str(out), "--quiet"])
    assert code == 0
    for name in ("timeseries.csv", "profiles.csv", "histograms.csv",
                 "manifest.json"):
        assert (out / name).exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["completed"] == 4
    assert manifest["aborted"] == 0
    for name, digest in manifest["outputs"].items():
        h = hashlib.sha256((out / name).read_bytes()).hexdigest()
        assert digest == "sha256:" + h


def test_rerun_is_byte_identical(tmp_path):
    cfg = tmp_path / "cfg.json"
    write_config(cfg)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert cli.main(["run", "--config", str(cfg), "--out", str(out1), "--quiet"]) == 0
    assert cli.main(["run", "--config", str(cfg), "--out", str(out2), "--quiet"]) == 0
    assert (out1 / "timeseries.csv").read_bytes() == (out2 / "timeseries.csv").read_bytes()


def test_zero_gamma_constant_sigma2(tmp_path):
    cfg = tmp_path / "cfg.json"
    write_config(cfg, gamma_star=0.0, kick="finite", f=4.0, ds=0.05)
    out = tmp_path / "out"
    assert cli.main(["run", "--config", str(cfg), "--out", str(out), "--quiet"]) == 0
    cols = cli.read_timeseries(str(out / "timeseries.csv"))
    s2 = cols["sigma2"]
    assert np.abs(s2 - s2[0]).max() < 1e-12


def test_csv_roundtrip_full_precision(tmp_path):
    cfg = tmp_path / "cfg.json"
    write_config(cfg, gamma_star=1.3, horizon=5, nr=3, seed=5)
    out = tmp_path / "out"
    assert cli.main(["run", "--config", str(cfg), "--out", str(out), "--quiet"]) == 0
    import kickedgas as kg
    from kickedgas.ensemble import run_ensemble
    stats = run_ensemble(kg.SimConfig(gamma_star=1.3, lam=2.0, n_s=64,
                                      horizon=5, n_r=3, seed=5),
                         workers=1)
    cols = cli.read_timeseries(str(out / "timeseries.csv"))
    assert np.array_equal(cols["sigma2"], stats.mean["sigma2"])
    assert np.array_equal(cols["condensate"], stats.mean["condensate"])


def test_unknown_key_rejected(tmp_path):
    cfg = tmp_path / "cfg.json"
    base = write_config(cfg)
    base["gamma"] = 2.0
    cfg.write_text(json.dumps(base))
    out = tmp_path / "out"
    assert cli.main(["run", "--config", str(cfg), "--out", str(out),
                     "--quiet"]) == cli.EXIT_CONFIG


def test_flag_overrides(tmp_path):
    cfg = tmp_path / "cfg.json"
    write_config(cfg, gamma_star=1.0)
    out = tmp_path / "out"
    assert cli.main(["run", "--config", str(cfg), "--out", str(out), "--quiet",
                     "--gamma-star", "0.0", "--kick", "finite", "--f", "4.0",
                     "--ds", "0.05"]) == 0
    cols = cli.read_timeseries(str(out / "timeseries.csv"))
    assert np.abs(cols["sigma2"] - cols["sigma2"][0]).max() < 1e-12
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["gamma_star"] == 0.0


def test_numeric_abort_exit_code(tmp_path):
    cfg = tmp_path / "cfg.json"
    write_config(cfg, gamma_star=6.0, **{"lambda": 0.4}, ns=16, horizon=30, nr=8)
    out = tmp_path / "out"
    assert cli.main(["run", "--config", str(cfg), "--out", str(out),
                     "--quiet"]) == cli.EXIT_NUMERIC


def test_predict_reference_values(capsys):
    assert cli.main(["predict", "t_E", "--gamma-star", "0.7",
                     "--lambda", "3.03"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert float(lines[1].split(",")[-1]) == pytest.approx(82.4, abs=0.1)

    assert cli.main(["predict", "tau", "--gamma-star", "1.0",
                     "--lambda", "3.03"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert float(lines[1].split(",")[-1]) == pytest.approx(569, abs=1)

    assert cli.main(["predict", "t_f", "--gamma-star", "4.0",
                     "--lambda", "3.03", "--f", "1.0"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert float(lines[1].split(",")[-1]) == 0.0


def _write_series(path, t, y):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "sigma2", "sigma2_sd", "condensate", "ipr"])
        for ti, yi in zip(t, y):
            w.writerow([int(ti), repr(float(yi)), "0.0", "0.5", "1.0"])


def test_compare_exact_power_law(tmp_path, capsys):
    run_dir = tmp_path / "run"
    run_dir.mkdir()
    t = np.arange(1, 200)
    _write_series(run_dir / "timeseries.csv", t, 3.0 * t**0.5)
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"kind": "power_law", "series": "sigma2",
                                "window": [10, 150], "expected": 0.5,
                                "tol": 0.05}))
    assert cli.main(["compare", "--run", str(run_dir), "--spec", str(spec)]) == 0
    out = capsys.readouterr().out
    assert "PASS" in out


def test_compare_failure_and_refusal_codes(tmp_path, capsys):
    run_dir = tmp_path / "run"
    run_dir.mkdir()
    t = np.arange(1, 200)
    _write_series(run_dir / "timeseries.csv", t, 3.0 * t**0.9)
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"kind": "power_law", "series": "sigma2",
                                "window": [10, 150], "expected": 0.5,
                                "tol": 0.05}))
    assert cli.main(["compare", "--run", str(run_dir),
                     "--spec", str(spec)]) == cli.EXIT_COMPARE_FAIL
    assert "FAIL" in capsys.readouterr().out
    # window too narrow for a power-law fit -> refusal exit code
    spec.write_text(json.dumps({"kind": "power_law", "series": "sigma2",
                                "window": [100, 140], "expected": 0.5,
                                "tol": 0.05}))
    assert cli.main(["compare", "--run", str(run_dir),
                     "--spec", str(spec)]) == cli.EXIT_FIT


def test_sweep_command(tmp_path, capsys):
    cfg = tmp_path / "sweep.json"
    cfg.write_text(json.dumps({
        "kick": "delta", "lambda": 2.0, "ns": 64, "horizon": 6, "nr": 3,
        "seed": 4, "gamma_star": 1.0,
        "sweep": {"key": "gamma_star", "values": [0.8, 1.2]},
        "fit": "sigma2_final",
    }))
    out = tmp_path / "out"
    # unknown fit kind is a config error
    assert cli.main(["sweep", "--config", str(cfg), "--out", str(out),
                     "--quiet"]) == cli.EXIT_CONFIG
