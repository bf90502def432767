"""Synthetic two-DOF tendon-sheath device used as the test bed.

The output angle of each DOF comes from the piecewise-linear model; its
parameters follow the coupled DOF's commanded angle through a ground-truth
:class:`ParamMap`. Motor current is synthesized from the active branch:

* flat dead zone (L3/L7): constant ``baseline``
* pulling branches (L4/L8): ``baseline`` plus ``gain`` per degree past the dead-zone exit
* releasing branches (L2/L6): constant ``release`` level
* backlash (L1/L5): ``release`` plus a pulse that peaks early in the backlash
  interval and returns to ``release`` exactly when the backlash ends

Current is signed by the direction of motion. With the command held still, the
pulse decays with time constant ``decay``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .calibration.parammap import GRID_ANGLES, DofMap, ParamMap
from .errors import ConfigError
from .model import (
    DEFAULT_DEADBAND,
    WORKSPACE_LIMIT,
    Branch,
    HysteresisParams,
    ModelState,
    check_angle,
    rebase,
    reset,
    step,
)
from .traces import MotionTrace

SWEEP_AMPLITUDE = 90.0
SWEEP_FREQUENCY = 0.04
SWEEP_CYCLES = 2


@dataclass
class CurrentModel:
    baseline: float = 0.05
    gain: float = 0.02
    peak: float = 0.15
    decay: float = 0.3
    release: float = 0.02
    peak_at: float = 0.2

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not (math.isfinite(value) and value >= 0):
                raise ConfigError(f"current model {name} must be finite and >= 0")
        if not 0 < self.peak_at < 1:
            raise ConfigError("peak_at must lie in (0, 1)")
        if self.decay <= 0:
            raise ConfigError("decay must be > 0")

    def full_scale(self, span: float = SWEEP_AMPLITUDE) -> float:
        """Engaged current at ``span`` degrees past the dead-zone exit."""
        return self.baseline + self.gain * span

    def pulse(self, progress: float) -> float:
        if progress < self.peak_at:
            return progress / self.peak_at
        if progress < 1.0:
            return (1.0 - progress) / (1.0 - self.peak_at)
        return 0.0


def bell_knots(center: float, curvature: float, shift: float = 0.0,
               angles=GRID_ANGLES) -> np.ndarray:
    """``center + curvature*u**2 + shift*u`` at the grid angles, ``u = angle/90``."""
    u = np.asarray(angles, dtype=float) / 90.0
    return center + curvature * u ** 2 + shift * u


def default_true_map() -> ParamMap:
    """Ground truth with dead zones that widen (and shift) with the other DOF's bend."""
    angles = np.asarray(GRID_ANGLES)
    dof1 = DofMap(angles,
                  d_pos=bell_knots(28.0, 6.0, 2.0), d_neg=bell_knots(-28.0, -6.0, 2.0),
                  b_pos=bell_knots(9.0, 1.0), b_neg=bell_knots(8.5, 1.0),
                  h_pos=-4.0, h_neg=4.0)
    dof2 = DofMap(angles,
                  d_pos=bell_knots(26.0, 5.0, -1.5), d_neg=bell_knots(-27.0, -5.0, -1.5),
                  b_pos=bell_knots(8.0, 1.5), b_neg=bell_knots(8.0, 1.5),
                  h_pos=-3.5, h_neg=3.5)
    return ParamMap(1.32, [dof1, dof2])


def single_params_map(params: HysteresisParams, angles=GRID_ANGLES) -> ParamMap:
    """A map whose parameters do not depend on the other DOF."""
    n = len(angles)
    dof = DofMap(np.asarray(angles, dtype=float), np.full(n, params.d_pos), np.full(n, params.d_neg),
                 np.full(n, params.b_pos), np.full(n, params.b_neg), params.h_pos, params.h_neg)
    return ParamMap(params.omega, [dof, dof])


@dataclass
class PlantConfig:
    true_map: ParamMap = field(default_factory=default_true_map)
    current: CurrentModel = field(default_factory=CurrentModel)
    noise: float = 0.0
    tracker_noise: float = 0.0
    sample_rate: float = 100.0
    seed: int = 0
    mismatch_pct: float = 0.0

    def __post_init__(self):
        if not self.sample_rate > 40.0:
            raise ConfigError(f"sample_rate must exceed 40 Hz, got {self.sample_rate:g}")
        if self.noise < 0 or self.tracker_noise < 0 or self.mismatch_pct < 0:
            raise ConfigError("noise levels and mismatch_pct must be >= 0")

    @property
    def dt(self) -> float:
        return 1.0 / self.sample_rate

    def noise_for_fraction(self, fraction: float) -> float:
        """Current noise sigma equal to ``fraction`` of the engaged full-scale current."""
        return fraction * self.current.full_scale()

    def to_dict(self) -> dict:
        return {
            "true_map": self.true_map.to_dict(),
            "current": asdict(self.current),
            "noise": self.noise,
            "tracker_noise": self.tracker_noise,
            "sample_rate": self.sample_rate,
            "seed": self.seed,
            "mismatch_pct": self.mismatch_pct,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PlantConfig":
        allowed = {"true_map", "current", "noise", "tracker_noise", "sample_rate", "seed", "mismatch_pct"}
        extra = set(d) - allowed
        if extra:
            raise ConfigError(f"unknown plant config keys {sorted(extra)}")
        kw = {k: v for k, v in d.items() if k not in ("true_map", "current")}
        if "true_map" in d:
            kw["true_map"] = ParamMap.from_dict(d["true_map"])
        if "current" in d:
            unknown = set(d["current"]) - set(asdict(CurrentModel()))
            if unknown:
                raise ConfigError(f"unknown current model keys {sorted(unknown)}")
            kw["current"] = CurrentModel(**d["current"])
        return cls(**kw)


class Plant:
    """Stepped simulation of both DOFs.

    ``mismatch_pct`` perturbs the ground-truth map once at construction
    (seeded), emulating coupling the calibration cannot see.
    """

    def __init__(self, config: PlantConfig, x0=(0.0, 0.0), seed: int | None = None,
                 mismatch_pct: float | None = None, deadband: float = DEFAULT_DEADBAND):
        self.config = config
        self.deadband = deadband
        self.rng = np.random.default_rng(config.seed if seed is None else seed)
        pct = config.mismatch_pct if mismatch_pct is None else mismatch_pct
        self.true_map = config.true_map.perturbed(pct, self.rng) if pct > 0 else config.true_map
        x0 = [check_angle(v) for v in x0]
        self.params: list[HysteresisParams] = []
        self.states: list[ModelState] = []
        for dof in range(2):
            p = self.true_map.params(dof, x0[1 - dof])
            self.params.append(p)
            self.states.append(reset(p, x0[dof], p.ascending(x0[dof])))
        self.pulse_scale = [1.0, 1.0]

    @property
    def outputs(self) -> tuple[float, float]:
        return self.states[0].last_output, self.states[1].last_output

    def _advance(self, dof: int, x: float, params: HysteresisParams) -> tuple[float, float]:
        old = self.states[dof]
        if params is not self.params[dof] and params != self.params[dof]:
            old = rebase(old, params)
            self.params[dof] = params
        y, new = step(x, old, params, self.deadband)
        self.states[dof] = new
        moved = abs(x - old.prev_input) > self.deadband
        if new.branch.is_backlash and new.branch.direction != old.branch.direction:
            self.pulse_scale[dof] = 1.0
        elif not moved:
            self.pulse_scale[dof] *= math.exp(-self.config.dt / self.config.current.decay)
        return y, self._current(new, params, x, self.pulse_scale[dof])

    def _current(self, state: ModelState, p: HysteresisParams, x: float, scale: float) -> float:
        cm = self.config.current
        b = state.branch
        if b in (Branch.L3, Branch.L7):
            mag = cm.baseline
        elif b is Branch.L4:
            mag = cm.baseline + cm.gain * (x - p.d_pos)
        elif b is Branch.L8:
            mag = cm.baseline + cm.gain * (p.d_neg - x)
        elif b in (Branch.L2, Branch.L6):
            mag = cm.release
        else:
            width = p.b_neg if b is Branch.L1 else p.b_pos
            turn = state.reversal_input if state.reversal_input is not None else x
            progress = abs(x - turn) / width if width > 0 else 1.0
            mag = cm.release + cm.peak * cm.pulse(progress) * scale
        return float(b.direction) * mag

    def step(self, x_cmd) -> tuple[np.ndarray, np.ndarray]:
        """One sample for both DOFs; returns ``(outputs, currents)``.

        Each DOF's parameters follow the *other* DOF's command of this sample.
        """
        x = [check_angle(v) for v in x_cmd]
        outs, cur = np.empty(2), np.empty(2)
        for dof in range(2):
            p = self.true_map.params(dof, x[1 - dof])
            outs[dof], cur[dof] = self._advance(dof, x[dof], p)
        return self._measure(outs, cur)

    def run(self, commands, dofs=(0, 1)) -> tuple[np.ndarray, np.ndarray]:
        """Drive the plant with an ``(n, 2)`` command array.

        Only the DOFs listed in ``dofs`` are simulated (others report NaN).
        Noise draws are the same as the equivalent sequence of :meth:`step` calls
        when both DOFs are simulated.
        """
        cmd = np.asarray(commands, dtype=float).reshape(-1, 2)
        bad = ~np.isfinite(cmd) | (np.abs(cmd) > WORKSPACE_LIMIT)
        if bad.any():
            check_angle(cmd[bad][0])
        n = cmd.shape[0]
        outs = np.full((n, 2), np.nan)
        cur = np.full((n, 2), np.nan)
        for dof in dofs:
            series = self.true_map.params_series(dof, cmd[:, 1 - dof])
            col = cmd[:, dof].tolist()
            for i in range(n):
                outs[i, dof], cur[i, dof] = self._advance(dof, col[i], series[i])
        return self._measure(outs, cur)

    def _measure(self, outs: np.ndarray, cur: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        # draw order is fixed (current, then tracker) so seeds reproduce traces
        if self.config.noise > 0:
            cur = cur + self.rng.normal(0.0, self.config.noise, cur.shape)
        if self.config.tracker_noise > 0:
            outs = outs + self.rng.normal(0.0, self.config.tracker_noise, outs.shape)
        return outs, cur


def plant_step(x_cmd, plant: Plant) -> tuple[np.ndarray, np.ndarray, Plant]:
    """Functional-style alias of :meth:`Plant.step` (the plant is advanced in place)."""
    outs, cur = plant.step(x_cmd)
    return outs, cur, plant


def sweep_commands(dof: int, fixed_other: float, sample_rate: float,
                   amplitude: float = SWEEP_AMPLITUDE, frequency: float = SWEEP_FREQUENCY,
                   cycles: int = SWEEP_CYCLES) -> tuple[np.ndarray, np.ndarray]:
    n = int(round(cycles / frequency * sample_rate))
    t = np.arange(n) / sample_rate
    cmd = np.empty((n, 2))
    cmd[:, dof] = amplitude * np.sin(2 * np.pi * frequency * t)
    cmd[:, 1 - dof] = fixed_other
    return t, cmd


def run_sweep_protocol(config: PlantConfig, dof: int, fixed_other: float,
                       seed: int | None = None) -> MotionTrace:
    """Two +/-90 deg sinusoidal cycles at 0.04 Hz on ``dof`` with the other DOF held."""
    t, cmd = sweep_commands(dof, fixed_other, config.sample_rate)
    plant = Plant(config, x0=cmd[0], seed=seed, mismatch_pct=0.0)
    outs, cur = plant.run(cmd)
    return MotionTrace(t, cmd, outs, cur)
