from __future__ import annotations

import numpy as np
import pytest

from tsm_hysteresis.calibration.parammap import DofMap, ParamMap
from tsm_hysteresis.compensator import (
    compensate,
    compensate_step,
    init_compensator,
    refresh_params,
)
from tsm_hysteresis.errors import NonFiniteInput, OutOfDomain, Unreachable
from tsm_hysteresis.model import HysteresisParams, simulate
from tsm_hysteresis.plant import default_true_map


def test_identity_plant():
    p = HysteresisParams(0, 0, 0, 0, 0, 0, 1.0)
    s = init_compensator(p, 0.0)
    for y in np.concatenate([np.linspace(0, 50, 30), np.linspace(50, -70, 50)]):
        x, s = compensate_step(y, s)
        assert x == pytest.approx(y, abs=1e-12)


def test_inverse_of_l4(device_params):
    p = device_params
    s = init_compensator(p, p.d_pos + 1)
    x, _ = compensate_step(p.h_pos + p.omega * 10, s)
    assert x == pytest.approx(p.d_pos + 10, abs=1e-12)


def test_round_trip_through_model(device_params):
    t = np.arange(5000) / 100
    desired = 60 * np.sin(2 * np.pi * 0.04 * t)
    cmd = compensate(desired, device_params, x0=0.0)
    ys, _, _ = simulate(device_params, cmd)
    assert np.max(np.abs(ys - desired)) < 1e-6


def test_round_trip_irregular(device_params):
    rng = np.random.default_rng(4)
    desired = np.cumsum(rng.normal(0, 1.5, 3000)).clip(-80, 80)
    cmd = compensate(desired, device_params, x0=desired[0])
    ys, _, _ = simulate(device_params, cmd)
    # the model starts on the ascending curve at x0, not at desired[0]
    assert np.max(np.abs(ys[1:] - desired[1:])) < 1e-6


def test_reversal_jumps_by_backlash(device_params):
    p = device_params
    up = np.linspace(0, 60, 121)
    down = np.linspace(60, 40, 41)[1:]
    cmd = compensate(np.concatenate([up, down]), p, x0=0.0)
    jump = cmd[len(up) - 1] - cmd[len(up)]
    assert jump >= p.b_pos - 1e-9


def test_unreachable(device_params):
    s = init_compensator(device_params, 0.0)
    with pytest.raises(Unreachable):
        compensate_step(300.0, s)
    with pytest.raises(NonFiniteInput):
        compensate_step(float("nan"), s)


def test_slew_limit(device_params):
    s = init_compensator(device_params, 0.0, slew_limit=0.5)
    x, s = compensate_step(50.0, s)
    assert x == pytest.approx(0.5)
    with pytest.raises(ValueError):
        init_compensator(device_params, 0.0, slew_limit=0.0)


def test_refresh_at_knot_and_idempotent():
    pm = default_true_map()
    s = init_compensator(pm.params(0, 30.0), 40.0)
    s = refresh_params(s, 0.0, pm)
    m = pm.dofs[0]
    k = int(np.flatnonzero(m.angles == 0.0)[0])
    assert s.params_current.d_pos == m.d_pos[k]
    assert s.params_current.b_neg == m.b_neg[k]
    again = refresh_params(s, 0.0, pm)
    assert again.params_current == s.params_current


def test_refresh_keeps_output():
    pm = default_true_map()
    s = init_compensator(pm.params(0, 0.0), 0.0)
    for y in np.linspace(0, 45, 90):
        _, s = compensate_step(y, s)
    before = s.last_output
    for angle in (20.0, 55.0, -60.0):
        s = refresh_params(s, angle, pm)
        assert s.last_output == before


def test_refresh_out_of_domain():
    pm = default_true_map()
    strict = ParamMap(pm.omega, pm.dofs, extrapolate="error")
    s = init_compensator(pm.params(0, 0.0), 0.0)
    with pytest.raises(OutOfDomain):
        refresh_params(s, 95.0, strict)
    clamped = refresh_params(s, 95.0, pm)
    assert clamped.params_current == pm.params(0, 90.0)


def test_per_sample_params_track_map():
    pm = default_true_map()
    t = np.arange(2500) / 100
    desired = 60 * np.sin(2 * np.pi * 0.04 * t)
    other = 45 * np.sin(2 * np.pi * 0.08 * t)
    series = pm.params_series(0, other)
    cmd = compensate(desired, series, x0=0.0)
    assert np.all(np.isfinite(cmd))
    assert isinstance(pm.dofs[0], DofMap)
