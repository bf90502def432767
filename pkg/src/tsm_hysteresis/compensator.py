"""Feedforward inverse of the hysteresis model.

The compensator keeps its own copy of the device model. For every desired
output sample it picks the command that makes that model produce the
desired value, then advances the model with the command it emitted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .errors import NonFiniteInput, OutOfDomain, Unreachable
from .model import (
    DEFAULT_DEADBAND,
    WORKSPACE_LIMIT,
    HysteresisParams,
    ModelState,
    VelocitySign,
    rebase,
    reset,
    step,
)

if TYPE_CHECKING:
    from .calibration.parammap import ParamMap

EXACT_TOL = 1e-9


@dataclass(frozen=True)
class CompensatorState:
    plant_estimate: ModelState
    params_current: HysteresisParams
    slew_limit: float | None = None
    deadband: float = DEFAULT_DEADBAND

    @property
    def last_command(self) -> float:
        return self.plant_estimate.prev_input

    @property
    def last_output(self) -> float:
        return self.plant_estimate.last_output


def init_compensator(params: HysteresisParams, x0: float = 0.0, y0: float | None = None,
                     slew_limit: float | None = None,
                     deadband: float = DEFAULT_DEADBAND) -> CompensatorState:
    """Start a compensator whose internal model sits at ``(x0, y0)``.

    ``y0`` defaults to the ascending curve at ``x0``.
    """
    if slew_limit is not None and not slew_limit > 0:
        raise ValueError("slew_limit must be positive or None")
    y0 = params.ascending(x0) if y0 is None else y0
    return CompensatorState(reset(params, x0, y0), params, slew_limit, deadband)


def _candidate(y_d: float, s: CompensatorState) -> float:
    """Command that inverts the model for target ``y_d`` (before slew limiting)."""
    m, p = s.plant_estimate, s.params_current
    y = m.last_output
    x_prev = m.prev_input
    if y_d == y:
        return x_prev
    sign = VelocitySign.POSITIVE if y_d > y else VelocitySign.NEGATIVE
    x = p.ascending_inverse(y_d) if sign > 0 else p.descending_inverse(y_d)

    # A hold that can only end after a full backlash width jumps on release;
    # targets short of the landing value are held (minimum motion).
    if sign != m.branch.direction:
        turn = x_prev
        forced = (p.curve(sign, turn) > y) if sign > 0 else (p.curve(sign, turn) < y)
    elif m.branch.is_backlash and m.forced_exit:
        turn = m.reversal_input if m.reversal_input is not None else x_prev
        forced = True
    else:
        forced = False
    if forced:
        width = p.b_neg if sign > 0 else p.b_pos
        release = turn + width if sign > 0 else turn - width
        landing = p.curve(sign, release)
        if (sign > 0 and y_d < landing) or (sign < 0 and y_d > landing):
            return x_prev
        x = max(x, release) if sign > 0 else min(x, release)
    return x


def compensate_step(y_desired: float, state: CompensatorState) -> tuple[float, CompensatorState]:
    """Return ``(x_command, new_state)`` for one desired output sample."""
    y_d = float(y_desired)
    if not math.isfinite(y_d):
        raise NonFiniteInput(f"desired output {y_desired!r} is not finite")
    x = _candidate(y_d, state)
    if abs(x) > WORKSPACE_LIMIT:
        raise Unreachable(f"desired output {y_d:g} deg needs command {x:g} deg, "
                          f"beyond +/-{WORKSPACE_LIMIT:g} deg")
    if state.slew_limit is not None:
        x_prev = state.last_command
        x = min(max(x, x_prev - state.slew_limit), x_prev + state.slew_limit)
    _, estimate = step(x, state.plant_estimate, state.params_current, state.deadband)
    return x, replace(state, plant_estimate=estimate)


def refresh_params(state: CompensatorState, other_dof_angle: float, param_map: "ParamMap",
                   dof: int = 0) -> CompensatorState:
    """Swap in the parameters for the coupled DOF's current angle.

    The internal model's output is preserved, so the next command does not
    jump because of the parameter change alone.
    """
    if param_map.extrapolate == "error" and not param_map.in_domain(other_dof_angle):
        raise OutOfDomain(f"other-DOF angle {other_dof_angle:g} outside the calibration domain")
    params = param_map.params(dof, other_dof_angle)
    return set_params(state, params)


def set_params(state: CompensatorState, params: HysteresisParams) -> CompensatorState:
    if params == state.params_current:
        return state
    return replace(state, params_current=params, plant_estimate=rebase(state.plant_estimate, params))


def compensate(desired: Sequence[float], params: HysteresisParams | Sequence[HysteresisParams],
               x0: float = 0.0, y0: float | None = None, slew_limit: float | None = None,
               deadband: float = DEFAULT_DEADBAND) -> np.ndarray:
    """Compensate a whole trajectory.

    ``params`` is either one parameter set or one per sample (already looked
    up from the coupled DOF's commanded angle).
    """
    desired = np.asarray(desired, dtype=float)
    per_sample = not isinstance(params, HysteresisParams)
    first = params[0] if per_sample else params
    s = init_compensator(first, x0, y0, slew_limit, deadband)
    out = np.empty(len(desired))
    for i, y_d in enumerate(desired):
        if per_sample:
            s = set_params(s, params[i])
        out[i], s = compensate_step(y_d, s)
    return out
