from __future__ import annotations

import json
import subprocess
import sys
import time

import numpy as np
import pytest

from tsm_hysteresis.calibration import ParamMap
from tsm_hysteresis.cli import config_hash, load_config, main, trace_name
from tsm_hysteresis.errors import ConfigError
from tsm_hysteresis.evaluation import standard_suite

SMALL_EVAL = {
    "trials": 1,
    "write_plots": True,
    "scenarios": [
        {"controller": "NoCompensation", "input_kind": "Periodic",
         "dof_mode": {"kind": "OneDof", "fixed_other": 0.0}},
        {"controller": "WithCompensation", "input_kind": "Periodic",
         "dof_mode": {"kind": "OneDof", "fixed_other": 0.0}},
    ],
}


def _config(tmp_path, name="cfg.json", **sections):
    path = tmp_path / name
    path.write_text(json.dumps(sections))
    return str(path)


@pytest.fixture(scope="module")
def noiseless_run(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("cli")
    cfg = _config(tmp, plant={"noise": 0.0, "tracker_noise": 0.0}, evaluate=SMALL_EVAL)
    out = tmp / "out"
    assert main(["synth", "--config", cfg, "--out", str(out), "--seed", "3"]) == 0
    assert main(["calibrate", "--config", cfg, "--out", str(out), "--seed", "3"]) == 0
    return tmp, cfg, out


def test_synth_writes_grid(noiseless_run):
    _, _, out = noiseless_run
    csvs = sorted((out / "synth").glob("*.csv"))
    assert len(csvs) == 14
    assert (out / "synth" / trace_name(1, -90.0)).name == "phi2_other-90.csv"
    truth = json.loads((out / "synth" / "plant_truth.json").read_text())
    assert {"config_hash", "seed"} <= set(truth["meta"])
    assert csvs[0].read_text().startswith("# ")


def test_calibrate_recovers_truth(noiseless_run):
    _, _, out = noiseless_run
    truth = json.loads((out / "synth" / "plant_truth.json").read_text())["plant"]["true_map"]
    data = json.loads((out / "calibration" / "param_map.json").read_text())
    meta = data.pop("meta")
    assert meta["seed"] == 3
    got = ParamMap.from_dict(data)
    ref = ParamMap.from_dict(truth)
    for dof in (0, 1):
        for name in ("d_pos", "d_neg", "b_pos", "b_neg"):
            assert np.max(np.abs(getattr(got.dofs[dof], name) - getattr(ref.dofs[dof], name))) <= 1.0
    assert (out / "calibration" / "quality.json").exists()


def test_evaluate_small(noiseless_run):
    _, cfg, out = noiseless_run
    assert main(["evaluate", "--config", cfg, "--out", str(out), "--seed", "3"]) == 0
    report = json.loads((out / "evaluation" / "report.json").read_text())
    assert len(report["scenarios"]) == 2
    assert report["comparisons"][0]["improvement_pct"]["rmse"] > 50
    assert len(list((out / "evaluation" / "traces").glob("*.csv"))) == 2
    svgs = list((out / "evaluation" / "plots").glob("*.svg"))
    assert len(svgs) == 4 and all("<svg" in p.read_text() for p in svgs)


def test_truncated_trace_named(noiseless_run, tmp_path, capsys):
    _, cfg, out = noiseless_run
    bad = tmp_path / "synth"
    bad.mkdir()
    for p in (out / "synth").glob("*.csv"):
        (bad / p.name).write_text(p.read_text())
    victim = bad / trace_name(0, 30.0)
    lines = victim.read_text().splitlines()
    victim.write_text("\n".join(lines[:1000]) + "\n")
    code = main(["calibrate", "--config", cfg, "--out", str(tmp_path)])
    assert code == 1
    err = json.loads(capsys.readouterr().err.strip())
    assert victim.name in err["message"] and "samples" in err["message"]
    assert err["error"] == "TraceFormatError"


def test_unknown_key_rejected(tmp_path):
    with pytest.raises(ConfigError, match="bogus"):
        load_config(_config(tmp_path, plant={"bogus": 1}))
    with pytest.raises(ConfigError):
        load_config(None, {"seed": -1})


def test_hash_ignores_paths(tmp_path):
    a = load_config(None, {"out": str(tmp_path / "a")})
    b = load_config(None, {"out": str(tmp_path / "b")})
    c = load_config(None, {"seed": 1})
    assert config_hash(a) == config_hash(b) != config_hash(c)


def test_error_json_on_stderr(tmp_path):
    cfg = _config(tmp_path, evaluate={"trials": 1, "nope": True})
    proc = subprocess.run([sys.executable, "-m", "tsm_hysteresis.cli", "synth", "--config", cfg],
                          capture_output=True, text=True)
    assert proc.returncode != 0
    err = json.loads(proc.stderr.strip().splitlines()[-1])
    assert err["error"] == "ConfigError" and "nope" in err["message"]
    proc = subprocess.run([sys.executable, "-m", "tsm_hysteresis.cli", "frobnicate"],
                          capture_output=True, text=True)
    assert proc.returncode == 2
    assert json.loads(proc.stderr.strip())["error"] == "UsageError"


def test_standard_suite_budget(noiseless_run):
    _, _, out = noiseless_run
    start = time.perf_counter()
    assert main(["evaluate", "--out", str(out), "--seed", "3"]) == 0
    elapsed = time.perf_counter() - start
    report = json.loads((out / "evaluation" / "report.json").read_text())
    names = [s["name"] for s in report["scenarios"]]
    assert sorted(names) == sorted(s.name for s in standard_suite())
    assert len(names) == len(set(names))
    for comp in report["comparisons"]:
        assert set(comp["improvement_pct"]) == {"ptpe", "rmse"}
    assert elapsed < 60.0
