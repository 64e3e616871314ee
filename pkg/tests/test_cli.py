import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from mfmlmc.cli import main


@pytest.fixture(scope="module")
def exported(tmp_path_factory):
    out = tmp_path_factory.mktemp("mm")
    assert main(["models", "export", "--id", "michaelis_menten", "--out", str(out)]) == 0
    return out


def read_csv(path):
    return list(csv.DictReader(open(path)))


def test_export_files(exported):
    for name in ("model.json", "data.csv", "problem.json"):
        assert (exported / name).exists()
    cfg = json.loads((exported / "problem.json").read_text())
    assert cfg["benchmark"] == "michaelis_menten" and cfg["scale"] == "desk"


def test_simulate_exact_and_leap(exported, tmp_path):
    model = str(exported / "model.json")
    args = ["simulate", "--model", model, "--theta", "0.001,0.005,0.01", "--T", "80"]
    assert main(args + ["--out", str(tmp_path / "a.csv"), "--seed", "3"]) == 0
    assert main(args + ["--out", str(tmp_path / "b.csv"), "--seed", "3"]) == 0
    assert (tmp_path / "a.csv").read_text() == (tmp_path / "b.csv").read_text()
    rows = read_csv(tmp_path / "a.csv")
    assert list(rows[0]) == ["time", "E", "S", "ES", "P"]
    assert all(int(r["E"]) + int(r["ES"]) == 100 for r in rows)
    assert main(args + ["--tau", "10", "--out", str(tmp_path / "c.csv")]) == 0
    times = [float(r["time"]) for r in read_csv(tmp_path / "c.csv")]
    np.testing.assert_allclose(times, np.arange(0, 81, 10))


def test_simulate_observations(exported, tmp_path):
    obs = tmp_path / "obs.json"
    obs.write_text(json.dumps({"observed": ["P"], "sigma": 0.5, "times": [20, 40]}))
    assert main(["simulate", "--model", str(exported / "model.json"), "--theta",
                 "0.001,0.005,0.01", "--obs-config", str(obs), "--out",
                 str(tmp_path / "y.csv")]) == 0
    rows = read_csv(tmp_path / "y.csv")
    assert [r["time"] for r in rows] == ["20.0", "40.0"] and list(rows[0]) == ["time", "P"]


def test_simulate_needs_horizon(exported, tmp_path, capsys):
    assert main(["simulate", "--model", str(exported / "model.json"), "--theta",
                 "0.001,0.005,0.01", "--out", str(tmp_path / "x.csv")]) == 2
    assert "error:" in capsys.readouterr().err


@pytest.mark.parametrize("method, extra, level_files", [
    ("rejection", ["--N", "20"], False),
    ("mf", ["--N", "100", "--tau", "1", "--eta1", "0.5", "--eta2", "0.5"], False),
    ("mf", ["--N", "300", "--tau", "1", "--adaptive", "--burn-in", "50"], False),
    ("mlmc", ["--N", "20", "--eps1", "160", "--L", "3"], True),
    ("mlmc", ["--eps1", "160", "--m", "2", "--anchor-NL", "10", "--trial-n", "20"], True),
    ("mfmlmc", ["--N", "50", "--eps1", "160", "--L", "3", "--tau", "1,0.5,0.5"], True),
    ("mfmlmc", ["--eps1", "160", "--L", "2", "--tau", "1", "--adaptive", "--trial-n", "200",
                "--anchor-NL", "50"], True),
])
def test_infer(exported, tmp_path, capsys, method, extra, level_files):
    out = tmp_path / "run"
    argv = ["infer", "--config", str(exported / "problem.json"), "--method", method,
            "--out", str(out), "--cost-model", "draws", "--seed", "4"] + extra
    assert main(argv) == 0
    summary = json.loads(capsys.readouterr().out)
    report = json.loads((out / "report.json").read_text())
    assert report["estimate"] == summary["estimate"]
    assert 0 <= report["estimate"] <= 0.05
    if level_files:
        levels = read_csv(out / "levels.csv")
        assert len(levels) == len(report["per_level"])
        assert (out / f"samples_level{len(levels)}.csv").exists()
        if method == "mfmlmc":
            assert {"eta1", "eta2", "phi", "mean_weight", "expected_cost"} <= set(levels[0])
    else:
        assert read_csv(out / "samples.csv")[0].keys() >= {"k1", "k2", "k3", "w"}


def test_infer_reproducible(exported, tmp_path):
    outs = []
    for d in ("a", "b"):
        main(["infer", "--config", str(exported / "problem.json"), "--method", "mf", "--N",
              "100", "--tau", "1", "--cost-model", "draws", "--out", str(tmp_path / d)])
        outs.append((tmp_path / d / "samples.csv").read_text())
    assert outs[0] == outs[1]


def test_infer_reports_configuration_errors(exported, tmp_path, capsys):
    code = main(["infer", "--config", str(exported / "problem.json"), "--method", "mlmc",
                 "--eps1", "10", "--L", "3", "--out", str(tmp_path), "--cost-model", "draws"])
    assert code == 2
    assert capsys.readouterr().err.startswith("error:")


def test_infer_rejects_m_and_L_together(exported, tmp_path):
    with pytest.raises(SystemExit):
        main(["infer", "--config", str(exported / "problem.json"), "--method", "mlmc",
              "--m", "2", "--L", "3", "--out", str(tmp_path)])


def test_tune(exported, tmp_path, capsys):
    out = tmp_path / "tune.csv"
    assert main(["tune", "--config", str(exported / "problem.json"), "--taus", "0.5,2",
                 "--epsilons", "60,30", "--N", "200", "--cost-model", "draws",
                 "--out", str(out)]) == 0
    rows = read_csv(out)
    assert len(rows) == 4
    rec = json.loads(capsys.readouterr().out)
    assert rec["shared"] in (0.5, 2.0)


def test_bench(exported, tmp_path):
    cfg = tmp_path / "bench.json"
    cfg.write_text(json.dumps({"problem": str(exported / "problem.json"),
                               "methods": ["rejection", "mlmc"], "h2_relative": [0.1, 0.03],
                               "replicates": 2, "trial_n": 50, "pilot_n": 50,
                               "cost_model": "draws", "target": {"type": "mean", "index": 2}}))
    assert main(["bench", "--config", str(cfg), "--out", str(tmp_path / "out")]) == 0
    for name in ("runs.csv", "fits.json", "densities.csv"):
        assert (tmp_path / "out" / name).exists()
    assert len(read_csv(tmp_path / "out" / "runs.csv")) == 8


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "mfmlmc", "--help"], capture_output=True,
                         text=True)
    assert res.returncode == 0
    for cmd in ("simulate", "infer", "tune", "models", "bench"):
        assert cmd in res.stdout
