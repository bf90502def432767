"""Piecewise-linear model: parameter algebra, branches, reset, step."""

from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracle
from tsm_hysteresis.errors import (
    DegenerateLoop,
    InconsistentSeed,
    InvalidParams,
    NonFiniteInput,
    OutOfWorkspace,
    UnsetReference,
)
from tsm_hysteresis.model import (
    Branch,
    HysteresisModel,
    HysteresisParams,
    ModelState,
    VelocitySign,
    branch_value,
    derive_hats,
    rebase,
    reset,
    simulate,
    step,
    velocity_sign,
)


# -- parameter algebra ---------------------------------------------------------------
def test_hats_equal_heights():
    assert derive_hats(10, -10, 5, 5, 0, 0, 1.32) == pytest.approx((-5.0, 5.0), abs=1e-12)


def test_hats_hand_evaluated():
    hp, hn = derive_hats(15, -15, 5, 5, 10, -10, 1.32)
    assert hp == pytest.approx(20 / 1.32 - 10, abs=1e-12)
    assert hn == pytest.approx(-(20 / 1.32 - 10), abs=1e-12)
    assert hp == pytest.approx(5.1515, abs=1e-4)


def test_hats_symmetry():
    hp, hn = derive_hats(17, -17, 4, 4, -2.5, 2.5, 1.1)
    assert hp == pytest.approx(-hn, abs=1e-12)


def test_degenerate_loop_rejected():
    with pytest.raises(DegenerateLoop):
        HysteresisParams(1, -1, 20, 20, 0, 0, 1.0)


@pytest.mark.parametrize("bad", [dict(omega=0.0), dict(omega=-1.0), dict(b_pos=-0.1),
                                 dict(h_pos=math.nan), dict(d_pos=math.inf)])
def test_invalid_params(bad):
    base = dict(d_pos=20, d_neg=-20, b_pos=5, b_neg=5, h_pos=-2, h_neg=2, omega=1.3)
    base.update(bad)
    with pytest.raises(InvalidParams):
        HysteresisParams(**base)


def test_inverted_heights_accepted():
    p = HysteresisParams(20, -20, 5, 5, 3, -3, 1.3)
    assert p.d_hat_pos <= p.d_pos and p.d_neg <= p.d_hat_neg


def test_json_round_trip(device_params, tmp_path):
    path = tmp_path / "p.json"
    device_params.save(path)
    doc = json.loads(path.read_text())
    assert set(doc) == {"d_pos", "d_neg", "b_pos", "b_neg", "h_pos", "h_neg", "omega",
                        "d_hat_pos", "d_hat_neg"}
    assert HysteresisParams.load(path) == device_params


def test_json_rejects_derived_mismatch(device_params):
    doc = device_params.to_dict()
    doc["d_hat_pos"] += 2e-6
    with pytest.raises(InvalidParams):
        HysteresisParams.from_dict(doc)
    doc["d_hat_pos"] -= 1.5e-6
    HysteresisParams.from_dict(doc)  # within 1e-6


def test_json_rejects_extra_and_missing(device_params):
    doc = device_params.to_dict()
    with pytest.raises(InvalidParams):
        HysteresisParams.from_dict({**doc, "extra": 1})
    del doc["omega"]
    with pytest.raises(InvalidParams):
        HysteresisParams.from_dict(doc)


# -- branches ---------------------------------------------------------------------------
def test_branch_values(device_params):
    p = device_params
    for x in (-50, 0, 13):
        assert branch_value(Branch.L3, x, p) == p.h_pos
        assert branch_value(Branch.L7, x, p) == p.h_neg
    assert branch_value(Branch.L4, p.d_pos, p) == pytest.approx(p.h_pos, abs=1e-12)
    assert branch_value(Branch.L2, p.d_hat_pos, p) == pytest.approx(p.h_pos, abs=1e-12)
    assert branch_value(Branch.L8, p.d_neg, p) == pytest.approx(p.h_neg, abs=1e-12)
    assert branch_value(Branch.L6, p.d_hat_neg, p) == pytest.approx(p.h_neg, abs=1e-12)


def test_backlash_branches_need_anchor(device_params):
    with pytest.raises(UnsetReference):
        branch_value(Branch.L5, 0.0, device_params)
    s = ModelState(Branch.L3, None, None, VelocitySign.ZERO, -4.0, 0.0)
    with pytest.raises(UnsetReference):
        branch_value(Branch.L1, 0.0, device_params, s)


def test_signed_l1_convention(device_params):
    p = device_params
    s = ModelState(Branch.L1, 40.0, -50.0, VelocitySign.POSITIVE, 0.0, -50.0)
    assert branch_value(Branch.L1, 0.0, p, s) == pytest.approx(p.omega * (-50.0 - p.d_neg) + p.h_neg)
    assert branch_value(Branch.L5, 0.0, p, s) == pytest.approx(p.omega * (40.0 - p.d_pos) + p.h_pos)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_curves_match_oracle(seed):
    rng = np.random.default_rng(seed)
    q = oracle.random_params(rng)
    p = HysteresisParams(*q.as_tuple())
    for x in rng.uniform(-110, 110, 20):
        assert p.ascending(x) == pytest.approx(oracle.up(q, x), abs=1e-9)
        assert p.descending(x) == pytest.approx(oracle.down(q, x), abs=1e-9)


# -- reset --------------------------------------------------------------------------------
def test_reset_between_levels_picks_nearer_flat(symmetric_params):
    p = symmetric_params
    assert reset(p, 0.0, 0.5 * p.h_neg).branch is Branch.L7
    assert reset(p, 0.0, 0.5 * p.h_pos).branch is Branch.L3


def test_reset_on_l4(device_params):
    p = device_params
    s = reset(p, p.d_pos + 10, p.omega * 10 + p.h_pos)
    assert s.branch is Branch.L4
    assert s.last_output == pytest.approx(p.omega * 10 + p.h_pos)


def test_reset_inconsistent(device_params):
    with pytest.raises(InconsistentSeed):
        reset(device_params, 0.0, 10 * device_params.h_pos)


def test_reset_inside_band_holds(device_params):
    p = device_params
    x = 60.0
    y = 0.5 * (p.ascending(x) + p.descending(x)) + 1.0
    s = reset(p, x, y)
    assert s.branch.is_backlash and s.last_output == y


def test_reset_rejects_nonfinite(device_params):
    with pytest.raises(NonFiniteInput):
        reset(device_params, math.nan, 0.0)
    with pytest.raises(OutOfWorkspace):
        reset(device_params, 130.0, 0.0)


# -- step -----------------------------------------------------------------------------------
def test_velocity_deadband():
    assert velocity_sign(5e-5, VelocitySign.NEGATIVE) is VelocitySign.NEGATIVE
    assert velocity_sign(2e-4, VelocitySign.NEGATIVE) is VelocitySign.POSITIVE
    assert velocity_sign(-2e-4, VelocitySign.ZERO) is VelocitySign.NEGATIVE
    assert velocity_sign(0.0, VelocitySign.ZERO, deadband=0.0) is VelocitySign.ZERO


def test_ascending_ramp_visits_l2_l3_l4(symmetric_params):
    p = symmetric_params
    xs = np.linspace(-90, 90, 721)
    state = reset(p, xs[0], p.ascending(xs[0]))
    seen = []
    for x in xs:
        _, state = step(x, state, p)
        if not seen or seen[-1] != state.branch:
            seen.append(state.branch)
    assert seen == [Branch.L2, Branch.L3, Branch.L4]


def test_constant_input_constant_output(device_params):
    ys, _, _ = simulate(device_params, [33.0] * 50)
    assert np.all(ys == ys[0])


def test_step_rejects_bad_input(device_params):
    s = reset(device_params, 0.0, device_params.h_pos)
    with pytest.raises(NonFiniteInput):
        step(math.inf, s, device_params)
    with pytest.raises(OutOfWorkspace):
        step(-121.0, s, device_params)


def test_reversal_on_l4_holds_for_b_pos(device_params):
    p = device_params
    up = np.linspace(0, 70, 141)
    down = np.linspace(70, 40, 301)[1:]
    ys, br, _ = simulate(p, np.concatenate([up, down]))
    held = ys[len(up) - 1]
    dn = ys[len(up):]
    in_hold = down > 70 - p.b_pos + 1e-9
    assert np.all(dn[in_hold] == held)
    assert np.all(br[len(up):][in_hold] == Branch.L5)
    released = ~in_hold
    assert np.allclose(dn[released], [p.descending(x) for x in down[released]], atol=1e-9)


def test_reversal_in_dead_zone_keeps_output(symmetric_params):
    p = symmetric_params
    xs = np.concatenate([np.linspace(0, 5, 11), np.linspace(5, -5, 21)[1:]])
    ys, _, state = simulate(p, xs)
    assert np.all(ys == p.h_pos)
    # both anchors reproduce the held level
    assert branch_value(Branch.L5, 0, p, state) == pytest.approx(p.h_pos)
    assert branch_value(Branch.L1, 0, p, state) == pytest.approx(p.h_pos)


def test_single_line_loop():
    p = HysteresisParams(5.0, 5.0, 0.0, 0.0, 1.0, 1.0, 1.0)
    assert p.is_single_line
    rng = np.random.default_rng(3)
    xs = np.cumsum(rng.normal(0, 2, 300)).clip(-100, 100)
    ys, _, _ = simulate(p, xs)
    assert np.allclose(ys, xs - 5 + 1, atol=1e-9)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_monotone_input_gives_monotone_output(seed):
    rng = np.random.default_rng(seed)
    p = HysteresisParams(*oracle.random_params(rng, allow_inverted=False).as_tuple())
    xs = np.sort(rng.uniform(-100, 100, 80))
    ys, _, _ = simulate(p, xs)
    assert np.all(np.diff(ys) >= -1e-12)
    ys, _, _ = simulate(p, xs[::-1])
    assert np.all(np.diff(ys) <= 1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_output_bounded_by_branch_extremes(seed):
    rng = np.random.default_rng(seed)
    q = oracle.random_params(rng, allow_inverted=False)
    p = HysteresisParams(*q.as_tuple())
    xs = oracle.random_signal(rng, q)
    ys, _, _ = simulate(p, xs)
    a, b = xs.min(), xs.max()
    lo = min(branch_value(Branch.L8, a, p), branch_value(Branch.L6, a, p), p.h_neg)
    hi = max(branch_value(Branch.L4, b, p), branch_value(Branch.L2, b, p), p.h_pos)
    # the seed sits on the ascending curve at xs[0]
    lo, hi = min(lo, ys[0]), max(hi, ys[0])
    assert ys.min() >= lo - 1e-9 and ys.max() <= hi + 1e-9


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_state_self_consistent(seed):
    rng = np.random.default_rng(seed)
    q = oracle.random_params(rng)
    p = HysteresisParams(*q.as_tuple())
    state = reset(p, 50.0 + q.d_pos, p.ascending(50.0 + q.d_pos))
    for x in oracle.random_signal(rng, q):
        y, state = step(x, state, p)
        assert y == state.last_output
        assert branch_value(state.branch, x, p, state) == pytest.approx(y, abs=1e-9)


def test_deterministic(device_params):
    q = oracle.P(*list(device_params.to_dict().values())[:7])
    xs = oracle.random_signal(np.random.default_rng(9), q)
    a, _, _ = simulate(device_params, xs)
    b, _, _ = simulate(device_params, xs)
    assert a.tobytes() == b.tobytes()


def test_rebase_keeps_output(device_params):
    p = device_params
    ys, _, state = simulate(p, np.linspace(0, 80, 200))
    shifted = HysteresisParams(31.0, -31.0, 9.0, 8.5, -4.0, 4.0, 1.32)
    new = rebase(state, shifted)
    assert new.last_output == state.last_output
    assert branch_value(new.branch, new.prev_input, shifted, new) == pytest.approx(new.last_output)


def test_stateful_wrapper(device_params):
    m = HysteresisModel(device_params, x0=40.0)
    assert m.output == pytest.approx(device_params.ascending(40.0))
    m.step(50.0)
    assert m.output == pytest.approx(device_params.ascending(50.0))
    m.set_params(HysteresisParams(30.0, -28.0, 9.0, 8.5, -4.0, 4.0, 1.32))
    assert m.output == pytest.approx(device_params.ascending(50.0))
