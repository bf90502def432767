from __future__ import annotations

import json

import numpy as np
import pytest

import oracle
from helpers import fixed_plant
from tsm_hysteresis.evaluation import (
    Controller,
    InputKind,
    OneDof,
    Scenario,
    TwoDof,
    format_tables,
    gen_nonperiodic,
    gen_periodic,
    improvement,
    ptpe,
    rmse,
    run_scenario,
    run_suite,
    run_trial,
    standard_suite,
)
from tsm_hysteresis.model import HysteresisParams
from tsm_hysteresis.plant import single_params_map

DEVICE = HysteresisParams(28.0, -28.0, 9.0, 8.5, -4.0, 4.0, 1.32)


def test_periodic_generator():
    y = gen_periodic(50.0)
    assert y[0] == 0.0
    assert y.max() == pytest.approx(60.0, abs=1e-9)
    # one period is 25 s
    assert np.allclose(y[:2500], y[2500:5000], atol=1e-9)
    assert y.size == 5000


def test_nonperiodic_generator():
    y = gen_nonperiodic(100.0)
    assert y[0] == 0.0
    assert np.abs(y).max() <= 60.0
    assert not np.allclose(y[:5000], y[5000:], atol=1.0)


def test_metrics():
    assert ptpe([2.0] * 10) == 0.0
    assert ptpe([-3.0, 5.0]) == 8.0
    assert rmse(np.zeros(7)) == 0.0
    assert rmse([3.0, 4.0]) == pytest.approx(3.5355, abs=1e-4)
    assert improvement(20.0, 5.0) == 75.0
    with pytest.raises(ValueError):
        rmse([])


def test_translation_invariance_of_ptpe():
    rng = np.random.default_rng(0)
    e = rng.normal(size=100)
    assert ptpe(e + 7.5) == pytest.approx(ptpe(e))


def test_exact_params_near_identity():
    cfg = fixed_plant(DEVICE)
    sc = Scenario(Controller.WITH_COMPENSATION, InputKind.PERIODIC, OneDof(0.0), trials=1)
    run = run_trial(sc, cfg, single_params_map(DEVICE))
    assert rmse(run.errors(0)) < 0.5


def test_uncompensated_ptpe_brute_force():
    cfg = fixed_plant(DEVICE)
    sc = Scenario(Controller.NO_COMPENSATION, InputKind.PERIODIC, OneDof(0.0), trials=1)
    run = run_trial(sc, cfg, None)
    q = oracle.P(28.0, -28.0, 9.0, 8.5, -4.0, 4.0, 1.32)
    ys, _, _ = oracle.replay(q, run.desired[:, 0])
    e = (ys - run.desired[:, 0])[run.t >= 6.25]
    assert ptpe(run.errors(0)) == pytest.approx(e.max() - e.min(), abs=1e-9)
    assert 10.0 < rmse(run.errors(0)) < 35.0


def test_trial_spread_from_noise():
    quiet = fixed_plant(DEVICE)
    noisy = fixed_plant(DEVICE, tracker_noise=0.1)
    sc = Scenario(Controller.NO_COMPENSATION, InputKind.PERIODIC, OneDof(0.0), trials=3)
    assert run_scenario(sc, quiet, None).stats("rmse").std == 0.0
    assert run_scenario(sc, noisy, None).stats("rmse").std > 0.0


def test_two_dof_speed_ratio():
    sc = Scenario(Controller.NO_COMPENSATION, InputKind.PERIODIC, TwoDof(), trials=1)
    run = run_trial(sc, fixed_plant(DEVICE), None)
    assert np.allclose(run.desired[:, 1], gen_periodic(50.0, speed=2.0))
    assert np.all(np.isfinite(run.output))


def test_report_schema():
    scenarios = [Scenario(c, k, OneDof(30.0), trials=2) for k in InputKind for c in Controller]
    pm = single_params_map(DEVICE)
    report = run_suite(scenarios, fixed_plant(DEVICE, tracker_noise=0.1), pm)
    doc = json.loads(report.to_json())
    names = [s["name"] for s in doc["scenarios"]]
    assert sorted(names) == sorted(s.name for s in scenarios)
    assert len(doc["comparisons"]) == 2
    for comp in doc["comparisons"]:
        assert set(comp["improvement_pct"]) == {"ptpe", "rmse"}
    assert set(doc["summary"]) == {"OneDof/Periodic", "OneDof/NonPeriodic"}
    for row in doc["summary"].values():
        assert set(row["improvement_pct"]) == {"ptpe", "rmse"}
    table = format_tables(report)
    assert "Table 1." in table and "Table 2." in table and "impr. %" in table


def test_scenario_round_trip():
    for s in standard_suite(trials=2):
        assert Scenario.from_dict(s.to_dict()) == s
    with pytest.raises(ValueError):
        Scenario.from_dict({"controller": "x", "input_kind": "Periodic", "dof_mode": {"kind": "TwoDof"}})


def test_duplicate_scenarios_rejected():
    s = Scenario(Controller.NO_COMPENSATION, InputKind.PERIODIC, OneDof(0.0), trials=1)
    with pytest.raises(ValueError):
        run_suite([s, s], fixed_plant(DEVICE), None)
