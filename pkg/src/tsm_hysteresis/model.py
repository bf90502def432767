"""Piecewise-linear dead-zone and backlash model of one tendon-sheath DOF.

The output of a DOF moves on eight straight lines. While the input rises the
output follows the *ascending* curve ``L2 -> L3 -> L4``; while it falls it
follows the *descending* curve ``L6 -> L7 -> L8``. ``L3`` and ``L7`` are the
flat dead-zone levels. After a direction change the output is held on a
horizontal backlash line (``L1`` when moving up again, ``L5`` when moving
down) until the curve of the new direction reaches the held level.

All angles are in degrees. Functions are pure: :func:`step` returns a new
:class:`ModelState` instead of mutating the old one.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import (
    DegenerateLoop,
    InconsistentSeed,
    InvalidParams,
    NonFiniteInput,
    OutOfWorkspace,
    UnsetReference,
)

WORKSPACE_LIMIT = 120.0
DEFAULT_DEADBAND = 1e-4
DEFAULT_SEED_TOL = 0.5
DERIVED_TOL = 1e-6


class VelocitySign(enum.IntEnum):
    NEGATIVE = -1
    ZERO = 0
    POSITIVE = 1


class Branch(enum.IntEnum):
    L1 = 1
    L2 = 2
    L3 = 3
    L4 = 4
    L5 = 5
    L6 = 6
    L7 = 7
    L8 = 8

    @property
    def direction(self) -> VelocitySign:
        return VelocitySign.POSITIVE if self <= 4 else VelocitySign.NEGATIVE

    @property
    def is_backlash(self) -> bool:
        return self in (Branch.L1, Branch.L5)

    @property
    def is_flat(self) -> bool:
        return self in (Branch.L1, Branch.L3, Branch.L5, Branch.L7)


def velocity_sign(delta: float, previous: VelocitySign,
                  deadband: float = DEFAULT_DEADBAND) -> VelocitySign:
    """Sign of an input increment; increments within the deadband keep ``previous``."""
    if delta > deadband:
        return VelocitySign.POSITIVE
    if delta < -deadband:
        return VelocitySign.NEGATIVE
    return previous


def check_angle(x: float, limit: float = WORKSPACE_LIMIT) -> float:
    x = float(x)
    if not math.isfinite(x):
        raise NonFiniteInput(f"input angle {x!r} is not finite")
    if abs(x) > limit:
        raise OutOfWorkspace(f"input angle {x:g} deg outside +/-{limit:g} deg")
    return x


def derive_hats(d_pos: float, d_neg: float, b_pos: float, b_neg: float,
                h_pos: float, h_neg: float, omega: float) -> tuple[float, float]:
    """Opposite-side dead-zone breakpoints that make the loop close.

    Returns ``(d_hat_pos, d_hat_neg)``. Raises :class:`DegenerateLoop` when a
    flat dead-zone segment would get negative width.
    """
    if not omega > 0:
        raise InvalidParams(f"omega must be > 0, got {omega!r}")
    d_hat_pos = (h_pos - h_neg) / omega + d_neg + b_neg
    d_hat_neg = (h_neg - h_pos) / omega + d_pos - b_pos
    if d_hat_pos > d_pos:
        raise DegenerateLoop(f"d_hat_pos={d_hat_pos:.6g} exceeds d_pos={d_pos:.6g}")
    if d_hat_neg < d_neg:
        raise DegenerateLoop(f"d_hat_neg={d_hat_neg:.6g} is below d_neg={d_neg:.6g}")
    return d_hat_pos, d_hat_neg


_FIELDS = ("d_pos", "d_neg", "b_pos", "b_neg", "h_pos", "h_neg", "omega",
           "d_hat_pos", "d_hat_neg")


@dataclass(frozen=True)
class HysteresisParams:
    """Parameters of one DOF's loop. ``d_hat_pos``/``d_hat_neg`` are derived."""

    d_pos: float
    d_neg: float
    b_pos: float
    b_neg: float
    h_pos: float
    h_neg: float
    omega: float
    d_hat_pos: float = field(init=False)
    d_hat_neg: float = field(init=False)

    def __post_init__(self):
        for name in _FIELDS[:7]:
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise InvalidParams(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, value)
        if self.b_pos < 0 or self.b_neg < 0:
            raise InvalidParams("backlash widths must be >= 0")
        hats = derive_hats(self.d_pos, self.d_neg, self.b_pos, self.b_neg,
                           self.h_pos, self.h_neg, self.omega)
        object.__setattr__(self, "d_hat_pos", hats[0])
        object.__setattr__(self, "d_hat_neg", hats[1])

    @classmethod
    def identity(cls, omega: float = 1.0) -> "HysteresisParams":
        return cls(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, omega)

    @property
    def is_single_line(self) -> bool:
        return (self.b_pos == 0 and self.b_neg == 0 and self.h_pos == self.h_neg
                and self.d_pos == self.d_neg)

    # -- curves ---------------------------------------------------------------
    def ascending(self, x: float) -> float:
        return branch_value(self.region_branch(VelocitySign.POSITIVE, x), x, self)

    def descending(self, x: float) -> float:
        return branch_value(self.region_branch(VelocitySign.NEGATIVE, x), x, self)

    def curve(self, sign: VelocitySign, x: float) -> float:
        return self.ascending(x) if sign > 0 else self.descending(x)

    def region_branch(self, sign: VelocitySign, x: float) -> Branch:
        if sign > 0:
            if x < self.d_hat_pos:
                return Branch.L2
            return Branch.L3 if x <= self.d_pos else Branch.L4
        if x > self.d_hat_neg:
            return Branch.L6
        return Branch.L7 if x >= self.d_neg else Branch.L8

    def ascending_inverse(self, y: float) -> float:
        if y >= self.h_pos:
            return self.d_pos + (y - self.h_pos) / self.omega
        return self.d_hat_pos + (y - self.h_pos) / self.omega

    def descending_inverse(self, y: float) -> float:
        if y <= self.h_neg:
            return self.d_neg + (y - self.h_neg) / self.omega
        return self.d_hat_neg + (y - self.h_neg) / self.omega

    def in_dead_zone(self, x: float) -> bool:
        return self.d_hat_pos <= x <= self.d_pos or self.d_neg <= x <= self.d_hat_neg

    def anchor_pos(self, y: float) -> float:
        """Input on the L4 line whose output is ``y``; makes ``L5`` evaluate to ``y``."""
        return self.d_pos + (y - self.h_pos) / self.omega

    def anchor_neg(self, y: float) -> float:
        """Input on the L8 line whose output is ``y``; makes ``L1`` evaluate to ``y``."""
        return self.d_neg + (y - self.h_neg) / self.omega

    # -- serialization ----------------------------------------------------------
    def to_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in _FIELDS}

    @classmethod
    def from_dict(cls, data: dict) -> "HysteresisParams":
        keys = set(data)
        if keys != set(_FIELDS):
            missing = sorted(set(_FIELDS) - keys)
            extra = sorted(keys - set(_FIELDS))
            raise InvalidParams(f"parameter document keys mismatch: missing={missing} extra={extra}")
        params = cls(*(data[name] for name in _FIELDS[:7]))
        for name in ("d_hat_pos", "d_hat_neg"):
            if abs(float(data[name]) - getattr(params, name)) > DERIVED_TOL:
                raise InvalidParams(f"{name}={data[name]!r} disagrees with recomputed "
                                    f"{getattr(params, name)!r}")
        return params

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "HysteresisParams":
        return cls.from_dict(json.loads(text))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "HysteresisParams":
        return cls.from_json(Path(path).read_text())


@dataclass(frozen=True)
class ModelState:
    """Mutable-by-replacement state of one model instance.

    ``x_ref_pos``/``x_ref_neg`` are the reversal anchors used by ``L5``/``L1``.
    ``reversal_input`` is the input at the most recent turning point and
    ``forced_exit`` marks a hold that must end after a full backlash width
    (the new direction's curve started on the far side of the held level).
    """

    branch: Branch
    x_ref_pos: float | None
    x_ref_neg: float | None
    prev_sign: VelocitySign
    last_output: float
    prev_input: float
    reversal_input: float | None = None
    forced_exit: bool = False


def branch_value(branch: Branch, x: float, params: HysteresisParams,
                 state: ModelState | None = None) -> float:
    """Evaluate one of the eight branch lines at input ``x``."""
    p = params
    if branch is Branch.L1:
        if state is None or state.x_ref_neg is None:
            raise UnsetReference("L1 needs the negative-side reversal anchor")
        return p.omega * (state.x_ref_neg - p.d_neg) + p.h_neg
    if branch is Branch.L2:
        return p.omega * (x - p.d_hat_pos) + p.h_pos
    if branch is Branch.L3:
        return p.h_pos
    if branch is Branch.L4:
        return p.omega * (x - p.d_pos) + p.h_pos
    if branch is Branch.L5:
        if state is None or state.x_ref_pos is None:
            raise UnsetReference("L5 needs the positive-side reversal anchor")
        return p.omega * (state.x_ref_pos - p.d_pos) + p.h_pos
    if branch is Branch.L6:
        return p.omega * (x - p.d_hat_neg) + p.h_neg
    if branch is Branch.L7:
        return p.h_neg
    if branch is Branch.L8:
        return p.omega * (x - p.d_neg) + p.h_neg
    raise ValueError(f"unknown branch {branch!r}")


def reset(params: HysteresisParams, x0: float, y0: float,
          tol: float = DEFAULT_SEED_TOL) -> ModelState:
    """Seed a state at a known input/output pair.

    A flat dead-zone segment within ``tol`` of ``y0`` wins; otherwise the
    nearer of the ascending/descending curves. A point strictly inside the
    loop band becomes a backlash hold at ``y0``.
    """
    x0 = check_angle(x0)
    y0 = float(y0)
    if not math.isfinite(y0):
        raise NonFiniteInput(f"seed output {y0!r} is not finite")
    p = params

    flats = []
    if p.d_hat_pos <= x0 <= p.d_pos:
        flats.append((abs(y0 - p.h_pos), Branch.L3, p.h_pos))
    if p.d_neg <= x0 <= p.d_hat_neg:
        flats.append((abs(y0 - p.h_neg), Branch.L7, p.h_neg))
    flats = [f for f in flats if f[0] <= tol]
    if flats:
        _, branch, y = min(flats, key=lambda f: f[0])
        return _seeded(p, branch, x0, y)

    in_both = p.d_hat_pos <= x0 <= p.d_pos and p.d_neg <= x0 <= p.d_hat_neg
    if in_both and min(p.h_pos, p.h_neg) <= y0 <= max(p.h_pos, p.h_neg):
        # between the two dead-zone levels: the nearer level wins
        if abs(y0 - p.h_pos) <= abs(y0 - p.h_neg):
            return _seeded(p, Branch.L3, x0, p.h_pos)
        return _seeded(p, Branch.L7, x0, p.h_neg)

    up, down = p.ascending(x0), p.descending(x0)
    if min(abs(y0 - up), abs(y0 - down)) <= tol:
        if abs(y0 - up) <= abs(y0 - down):
            return _seeded(p, p.region_branch(VelocitySign.POSITIVE, x0), x0, up)
        return _seeded(p, p.region_branch(VelocitySign.NEGATIVE, x0), x0, down)

    if min(up, down) <= y0 <= max(up, down):
        if abs(y0 - up) <= abs(y0 - down):
            # just turned around from the ascending curve, now holding downward
            return _seeded(p, Branch.L5, x0, y0, forced=down < y0)
        return _seeded(p, Branch.L1, x0, y0, forced=up > y0)

    raise InconsistentSeed(f"seed ({x0:g}, {y0:g}) is farther than {tol:g} deg from every branch")


def _seeded(p: HysteresisParams, branch: Branch, x0: float, y: float,
            forced: bool = False) -> ModelState:
    return ModelState(branch=branch, x_ref_pos=p.anchor_pos(y), x_ref_neg=p.anchor_neg(y),
                      prev_sign=VelocitySign.ZERO, last_output=y, prev_input=x0,
                      reversal_input=x0 if branch.is_backlash else None,
                      forced_exit=forced)


def step(x_t: float, state: ModelState, params: HysteresisParams,
         deadband: float = DEFAULT_DEADBAND) -> tuple[float, ModelState]:
    """Advance the model by one input sample; returns ``(output, new_state)``."""
    x = check_angle(x_t)
    p = params
    y = state.last_output
    sign = velocity_sign(x - state.prev_input, state.prev_sign, deadband)
    if sign is VelocitySign.ZERO:
        return y, ModelState(state.branch, state.x_ref_pos, state.x_ref_neg, state.prev_sign,
                             y, x, state.reversal_input, state.forced_exit)

    x_ref_pos, x_ref_neg = state.x_ref_pos, state.x_ref_neg
    if sign != state.branch.direction:
        turn = state.prev_input
        at_turn = p.curve(sign, turn)
        forced = at_turn < y if sign < 0 else at_turn > y
        in_dz = p.in_dead_zone(turn)
        if sign < 0 or in_dz:
            x_ref_pos = p.anchor_pos(y)
        if sign > 0 or in_dz:
            x_ref_neg = p.anchor_neg(y)
        holding = True
    elif state.branch.is_backlash:
        turn = state.reversal_input if state.reversal_input is not None else state.prev_input
        forced = state.forced_exit
        holding = True
    else:
        holding = False

    if holding:
        if forced:
            width = p.b_pos if sign < 0 else p.b_neg
            released = abs(x - turn) >= width
        else:
            target = p.curve(sign, x)
            released = target <= y if sign < 0 else target >= y
        if not released:
            branch = Branch.L5 if sign < 0 else Branch.L1
            return y, ModelState(branch, x_ref_pos, x_ref_neg, sign, y, x, turn, forced)

    branch = p.region_branch(sign, x)
    out = branch_value(branch, x, p)
    return out, ModelState(branch, x_ref_pos, x_ref_neg, sign, out, x, None, False)


def rebase(state: ModelState, params: HysteresisParams) -> ModelState:
    """Re-express ``state`` under new parameters without moving its output.

    Anchors are recomputed from the held output. An engaged state whose curve
    moved away from the output becomes a hold on the same side.
    """
    y = state.last_output
    ref_pos, ref_neg = params.anchor_pos(y), params.anchor_neg(y)
    s = state
    if s.branch.is_backlash:
        return ModelState(s.branch, ref_pos, ref_neg, s.prev_sign, y, s.prev_input,
                          s.reversal_input, s.forced_exit)
    side = s.branch.direction
    x = s.prev_input
    if abs(params.curve(side, x) - y) <= 1e-12:
        return ModelState(params.region_branch(side, x), ref_pos, ref_neg, s.prev_sign, y, x)
    hold = Branch.L1 if side > 0 else Branch.L5
    return ModelState(hold, ref_pos, ref_neg, s.prev_sign, y, x, x, False)


def simulate(params: HysteresisParams, inputs: Iterable[float], state: ModelState | None = None,
             deadband: float = DEFAULT_DEADBAND) -> tuple[np.ndarray, np.ndarray, ModelState]:
    """Drive the model with a whole input sequence.

    Without ``state`` the model is seeded on the ascending curve at the first
    input. Returns outputs, branch numbers and the final state.
    """
    xs = [float(v) for v in inputs]
    if state is None:
        state = reset(params, xs[0], params.ascending(xs[0]))
    ys = np.empty(len(xs))
    branches = np.empty(len(xs), dtype=int)
    for i, x in enumerate(xs):
        ys[i], state = step(x, state, params, deadband)
        branches[i] = state.branch
    return ys, branches, state


class HysteresisModel:
    """Stateful convenience wrapper around :func:`step`."""

    def __init__(self, params: HysteresisParams, x0: float = 0.0, y0: float | None = None,
                 deadband: float = DEFAULT_DEADBAND):
        self.params = params
        self.deadband = deadband
        self.state = reset(params, x0, params.ascending(x0) if y0 is None else y0)

    @property
    def output(self) -> float:
        return self.state.last_output

    def step(self, x: float) -> float:
        y, self.state = step(x, self.state, self.params, self.deadband)
        return y

    def set_params(self, params: HysteresisParams) -> None:
        self.state = rebase(self.state, params)
        self.params = params
