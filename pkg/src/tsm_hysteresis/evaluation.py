"""Controller comparison on the synthetic device.

Each scenario drives the plant with a desired trajectory either directly
(no compensation) or through the feedforward compensator, repeats it for a
number of seeded trials and reports PTPE and RMSE of ``output - desired``.

The compensator looks its parameters up from the *desired* angle of the
coupled DOF; the plant from the coupled DOF's actual command.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .calibration.parammap import ParamMap
from .compensator import compensate
from .plant import Plant, PlantConfig

PERIODIC_AMPLITUDE = 60.0
PERIODIC_FREQUENCY = 0.04
NONPERIODIC_AMPLITUDE = 30.0
NONPERIODIC_FREQUENCY = 0.02
STANDARD_FIXED_ANGLES = (-60.0, -30.0, 0.0, 30.0, 60.0)


class Controller(str, enum.Enum):
    NO_COMPENSATION = "NoCompensation"
    WITH_COMPENSATION = "WithCompensation"


class InputKind(str, enum.Enum):
    PERIODIC = "Periodic"
    NON_PERIODIC = "NonPeriodic"

    @property
    def duration(self) -> float:
        """Two periods of the slowest component."""
        return 2 / PERIODIC_FREQUENCY if self is InputKind.PERIODIC else 2 / NONPERIODIC_FREQUENCY

    @property
    def warmup(self) -> float:
        """Start-up window excluded from the error: a quarter of the slowest period."""
        return 0.25 / PERIODIC_FREQUENCY if self is InputKind.PERIODIC else 0.25 / NONPERIODIC_FREQUENCY


# -- trajectories -------------------------------------------------------------------
def sample_times(duration: float, sample_rate: float) -> np.ndarray:
    if not duration > 0:
        raise ValueError("duration must be > 0")
    return np.arange(int(round(duration * sample_rate))) / sample_rate


def gen_periodic(duration: float, sample_rate: float = 100.0, speed: float = 1.0) -> np.ndarray:
    t = sample_times(duration, sample_rate)
    return PERIODIC_AMPLITUDE * np.sin(2 * np.pi * PERIODIC_FREQUENCY * speed * t)


def gen_nonperiodic(duration: float, sample_rate: float = 100.0, speed: float = 1.0) -> np.ndarray:
    t = sample_times(duration, sample_rate)
    f = NONPERIODIC_FREQUENCY * speed
    return NONPERIODIC_AMPLITUDE * (np.sin(2 * np.pi * f * t) + np.sin(2 * np.pi * f * math.sqrt(3) * t))


def trajectory(kind: InputKind, duration: float, sample_rate: float, speed: float = 1.0) -> np.ndarray:
    gen = gen_periodic if kind is InputKind.PERIODIC else gen_nonperiodic
    return gen(duration, sample_rate, speed)


# -- metrics ---------------------------------------------------------------------------
def ptpe(errors) -> float:
    e = np.asarray(errors, dtype=float)
    if e.size == 0:
        raise ValueError("ptpe of an empty error trace")
    return float(e.max() - e.min())


def rmse(errors) -> float:
    e = np.asarray(errors, dtype=float)
    if e.size == 0:
        raise ValueError("rmse of an empty error trace")
    return float(math.sqrt(np.mean(e * e)))


def improvement(uncompensated: float, compensated: float) -> float:
    return 100.0 * (uncompensated - compensated) / uncompensated


# -- scenarios --------------------------------------------------------------------------
@dataclass(frozen=True)
class OneDof:
    fixed_other: float
    dof: int = 0

    @property
    def label(self) -> str:
        return f"OneDof(phi{self.dof + 1}, other={self.fixed_other:g})"


@dataclass(frozen=True)
class TwoDof:
    speed_ratio: float = 2.0

    @property
    def label(self) -> str:
        return "TwoDof"


@dataclass(frozen=True)
class Scenario:
    controller: Controller
    input_kind: InputKind
    dof_mode: OneDof | TwoDof
    trials: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")

    @property
    def name(self) -> str:
        return f"{self.controller.value}/{self.input_kind.value}/{self.dof_mode.label}"

    @property
    def condition(self) -> tuple:
        """Everything but the controller; paired scenarios share it."""
        return (self.input_kind, self.dof_mode, self.trials, self.seed)

    @property
    def dofs(self) -> tuple[int, ...]:
        return (self.dof_mode.dof,) if isinstance(self.dof_mode, OneDof) else (0, 1)

    def to_dict(self) -> dict:
        mode = ({"kind": "OneDof", "fixed_other": self.dof_mode.fixed_other, "dof": self.dof_mode.dof}
                if isinstance(self.dof_mode, OneDof)
                else {"kind": "TwoDof", "speed_ratio": self.dof_mode.speed_ratio})
        return {"controller": self.controller.value, "input_kind": self.input_kind.value,
                "dof_mode": mode, "trials": self.trials, "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        extra = set(d) - {"controller", "input_kind", "dof_mode", "trials", "seed"}
        if extra:
            raise ValueError(f"unknown scenario keys {sorted(extra)}")
        m = dict(d["dof_mode"])
        kind = m.pop("kind")
        if kind == "OneDof":
            mode = OneDof(float(m.pop("fixed_other")), int(m.pop("dof", 0)))
        elif kind == "TwoDof":
            mode = TwoDof(float(m.pop("speed_ratio", 2.0)))
        else:
            raise ValueError(f"unknown dof_mode kind {kind!r}")
        if m:
            raise ValueError(f"unknown dof_mode keys {sorted(m)}")
        return cls(Controller(d["controller"]), InputKind(d["input_kind"]), mode,
                   int(d.get("trials", 5)), int(d.get("seed", 0)))


def standard_suite(trials: int = 5, seed: int = 0, fixed_angles=STANDARD_FIXED_ANGLES,
                   two_dof: bool = True) -> list[Scenario]:
    modes = [OneDof(a, dof) for dof in (0, 1) for a in fixed_angles]
    if two_dof:
        modes.append(TwoDof())
    return [Scenario(c, k, m, trials, seed)
            for m in modes for k in InputKind for c in Controller]


# -- running --------------------------------------------------------------------------------
@dataclass
class TrialRun:
    t: np.ndarray
    desired: np.ndarray
    command: np.ndarray
    output: np.ndarray
    current: np.ndarray
    window: np.ndarray

    def errors(self, dof: int) -> np.ndarray:
        return self.output[self.window, dof] - self.desired[self.window, dof]


def trial_seed(scenario_seed: int, trial: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([scenario_seed, trial])


def run_trial(scenario: Scenario, plant_config: PlantConfig, param_map: ParamMap | None,
              trial: int = 0) -> TrialRun:
    fs = plant_config.sample_rate
    kind = scenario.input_kind
    t = sample_times(kind.duration, fs)
    desired = np.empty((t.size, 2))
    mode = scenario.dof_mode
    if isinstance(mode, OneDof):
        desired[:, mode.dof] = trajectory(kind, kind.duration, fs)
        desired[:, 1 - mode.dof] = mode.fixed_other
    else:
        desired[:, 0] = trajectory(kind, kind.duration, fs)
        desired[:, 1] = trajectory(kind, kind.duration, fs, mode.speed_ratio)

    command = desired.copy()
    if scenario.controller is Controller.WITH_COMPENSATION:
        if param_map is None:
            raise ValueError(f"{scenario.name}: compensation needs a parameter map")
        for dof in scenario.dofs:
            series = param_map.params_series(dof, desired[:, 1 - dof])
            command[:, dof] = compensate(desired[:, dof], series, x0=desired[0, dof])

    plant = Plant(plant_config, x0=command[0], seed=trial_seed(scenario.seed, trial))
    output, current = plant.run(command, dofs=scenario.dofs)
    window = t >= kind.warmup
    return TrialRun(t, desired, command, output, current, window)


@dataclass
class Stat:
    mean: float
    std: float

    @classmethod
    def of(cls, values) -> "Stat":
        v = np.asarray(values, dtype=float)
        return cls(float(v.mean()), float(v.std()))

    def to_list(self) -> list[float]:
        return [self.mean, self.std]


@dataclass
class ScenarioResult:
    scenario: Scenario
    ptpe: dict[int, np.ndarray]
    rmse: dict[int, np.ndarray]
    example: TrialRun | None = None

    def stats(self, metric: str, dof: int | None = None) -> Stat:
        values = getattr(self, metric)
        if dof is None:
            return Stat.of(np.concatenate([values[d] for d in sorted(values)]))
        return Stat.of(values[dof])

    def to_dict(self) -> dict:
        return {
            "name": self.scenario.name,
            "scenario": self.scenario.to_dict(),
            "per_dof": {f"phi{d + 1}": {"ptpe": self.stats("ptpe", d).to_list(),
                                         "rmse": self.stats("rmse", d).to_list(),
                                         "ptpe_trials": self.ptpe[d].tolist(),
                                         "rmse_trials": self.rmse[d].tolist()}
                        for d in sorted(self.ptpe)},
            "ptpe": self.stats("ptpe").to_list(),
            "rmse": self.stats("rmse").to_list(),
        }


def run_scenario(scenario: Scenario, plant_config: PlantConfig, param_map: ParamMap | None,
                 keep_example: bool = False) -> ScenarioResult:
    ptpes = {d: np.empty(scenario.trials) for d in scenario.dofs}
    rmses = {d: np.empty(scenario.trials) for d in scenario.dofs}
    example = None
    for k in range(scenario.trials):
        run = run_trial(scenario, plant_config, param_map, k)
        for d in scenario.dofs:
            e = run.errors(d)
            ptpes[d][k], rmses[d][k] = ptpe(e), rmse(e)
        if keep_example and k == 0:
            example = run
    return ScenarioResult(scenario, ptpes, rmses, example)


@dataclass
class Comparison:
    condition: str
    uncompensated: ScenarioResult
    compensated: ScenarioResult

    def improvement(self, metric: str, dof: int | None = None) -> float:
        return improvement(self.uncompensated.stats(metric, dof).mean,
                           self.compensated.stats(metric, dof).mean)

    def to_dict(self) -> dict:
        return {"condition": self.condition,
                "improvement_pct": {"ptpe": self.improvement("ptpe"), "rmse": self.improvement("rmse")},
                "per_dof_improvement_pct": {
                    f"phi{d + 1}": {"ptpe": self.improvement("ptpe", d), "rmse": self.improvement("rmse", d)}
                    for d in sorted(self.compensated.ptpe)}}


@dataclass
class ExperimentReport:
    results: list[ScenarioResult]
    comparisons: list[Comparison] = field(default_factory=list)

    def pooled(self, controller: Controller, kind: InputKind, two_dof: bool, metric: str) -> Stat:
        values = [r.__getattribute__(metric)[d] for r in self.results
                  if r.scenario.controller is controller and r.scenario.input_kind is kind
                  and isinstance(r.scenario.dof_mode, TwoDof) == two_dof
                  for d in sorted(r.ptpe)]
        if not values:
            raise KeyError(f"no results for {controller.value}/{kind.value}")
        return Stat.of(np.concatenate(values))

    def pooled_improvement(self, kind: InputKind, two_dof: bool, metric: str) -> float:
        return improvement(self.pooled(Controller.NO_COMPENSATION, kind, two_dof, metric).mean,
                           self.pooled(Controller.WITH_COMPENSATION, kind, two_dof, metric).mean)

    def to_dict(self) -> dict:
        summary = {}
        for two in (False, True):
            for kind in InputKind:
                try:
                    rows = {c.value: {m: self.pooled(c, kind, two, m).to_list() for m in ("ptpe", "rmse")}
                            for c in Controller}
                    rows["improvement_pct"] = {m: self.pooled_improvement(kind, two, m)
                                               for m in ("ptpe", "rmse")}
                except KeyError:
                    continue
                summary[f"{'TwoDof' if two else 'OneDof'}/{kind.value}"] = rows
        return {"scenarios": [r.to_dict() for r in self.results],
                "comparisons": [c.to_dict() for c in self.comparisons],
                "summary": summary}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def run_suite(scenarios: Sequence[Scenario], plant_config: PlantConfig, param_map: ParamMap | None,
              keep_examples: bool = False) -> ExperimentReport:
    """Run every scenario and pair controllers that share a condition."""
    names = [s.name + f"/seed={s.seed}" for s in scenarios]
    if len(set(names)) != len(names):
        raise ValueError("duplicate scenarios in suite")
    results = [run_scenario(s, plant_config, param_map, keep_examples) for s in scenarios]
    by_condition: dict[tuple, dict[Controller, ScenarioResult]] = {}
    for r in results:
        by_condition.setdefault(r.scenario.condition, {})[r.scenario.controller] = r
    comparisons = []
    for cond, pair in by_condition.items():
        if len(pair) == 2:
            unc, comp = pair[Controller.NO_COMPENSATION], pair[Controller.WITH_COMPENSATION]
            label = f"{cond[0].value}/{cond[1].label}"
            comparisons.append(Comparison(label, unc, comp))
    return ExperimentReport(results, comparisons)


# -- text tables -------------------------------------------------------------------------
def _ms(s: Stat) -> str:
    return f"({s.mean:5.1f}, {s.std:4.1f})"


def format_tables(report: ExperimentReport) -> str:
    lines: list[str] = []
    one = [r for r in report.results if isinstance(r.scenario.dof_mode, OneDof)
           and r.scenario.input_kind is InputKind.PERIODIC]
    if one:
        lines.append("Table 1. One-DOF periodic input, errors (mean, std) in degrees")
        head = f"{'knob':<5}{'other':>7}  {'PTPE no comp':>14}  {'PTPE comp':>14}  {'RMSE no comp':>14}  {'RMSE comp':>14}"
        lines += [head, "-" * len(head)]
        keys = sorted({(r.scenario.dof_mode.dof, r.scenario.dof_mode.fixed_other) for r in one})
        for dof, angle in keys:
            cell = {r.scenario.controller: r for r in one
                    if (r.scenario.dof_mode.dof, r.scenario.dof_mode.fixed_other) == (dof, angle)}
            row = f"phi{dof + 1:<2}{angle:>7g}"
            for metric in ("ptpe", "rmse"):
                for c in Controller:
                    row += f"  {_ms(cell[c].stats(metric)) if c in cell else '-':>14}"
            lines.append(row)
        lines.append("")
    for number, two, title in ((2, False, "One-DOF summary"), (3, True, "Two-DOF summary")):
        block = []
        for kind in InputKind:
            try:
                stats = {(c, m): report.pooled(c, kind, two, m) for c in Controller for m in ("ptpe", "rmse")}
            except KeyError:
                continue
            for m in ("ptpe", "rmse"):
                block.append(f"{kind.value:<12}{m.upper():<6}{_ms(stats[(Controller.NO_COMPENSATION, m)]):>14}"
                             f"  {_ms(stats[(Controller.WITH_COMPENSATION, m)]):>14}"
                             f"  {report.pooled_improvement(kind, two, m):>8.1f}")
        if block:
            head = f"{'input':<12}{'error':<6}{'no comp':>14}  {'comp':>14}  {'impr. %':>8}"
            lines += [f"Table {number}. {title}, errors (mean, std) in degrees", head, "-" * len(head), *block, ""]
    return "\n".join(lines)
