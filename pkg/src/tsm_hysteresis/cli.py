"""Batch front end: ``synth``, ``calibrate``, ``evaluate`` and ``all``.

Every run works from one JSON config (defaults below, overridden by the file
and then by flags). Output layout under ``out``::

    synth/phi{k}_other{angle}.csv   sweep traces, one per DOF and grid angle
    synth/plant_truth.json          ground-truth plant config
    calibration/param_map.json      recovered parameter map
    calibration/quality.json        per-grid-point extraction diagnostics
    evaluation/report.json          scenario statistics and improvement rates
    evaluation/tables.txt           aligned text tables
    evaluation/traces/*.csv         first trial of every scenario
    evaluation/plots/*.svg          time and input-output plots
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import re
import sys
import warnings
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .calibration import GRID_ANGLES, CalibrationOptions, ParamMap, calibrate
from .errors import ConfigError, HysteresisError, TraceFormatError
from .evaluation import (
    STANDARD_FIXED_ANGLES,
    Controller,
    ExperimentReport,
    Scenario,
    TrialRun,
    format_tables,
    run_suite,
    standard_suite,
)
from .plant import PlantConfig, run_sweep_protocol, sweep_commands
from .svg import line_chart
from .traces import MotionTrace

U64_MAX = 2 ** 64 - 1

DEFAULT_CONFIG: dict[str, Any] = {
    "seed": 0,
    "out": "tsm_out",
    "plant": {
        "noise": 0.037,
        "tracker_noise": 0.1,
        "sample_rate": 100.0,
        "current": None,
        "true_map": None,
    },
    "calibrate": {
        "traces_dir": None,
        "omega": None,
        "tie_backlash": False,
        "b_max": 30.0,
        "min_prominence": 0.05,
        "cycle_warn": 3.0,
    },
    "evaluate": {
        "param_map": None,
        "trials": 5,
        "mismatch_pct": 5.0,
        "fixed_angles": list(STANDARD_FIXED_ANGLES),
        "two_dof": True,
        "scenarios": None,
        "write_traces": True,
        "write_plots": True,
    },
}
# values taken verbatim (not merged key by key)
_OPAQUE = {("plant", "current"), ("plant", "true_map"), ("evaluate", "scenarios"),
           ("evaluate", "fixed_angles")}


# -- config -----------------------------------------------------------------------------
def _merge(base: dict, update: dict, path: tuple = ()) -> dict:
    out = copy.deepcopy(base)
    for key, value in update.items():
        where = ".".join((*path, key))
        if key not in base:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(base[key], dict) and (*path, key) not in _OPAQUE:
            if not isinstance(value, dict):
                raise ConfigError(f"config key {where!r} must be an object")
            out[key] = _merge(base[key], value, (*path, key))
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_config(path: str | None = None, overrides: dict | None = None) -> dict:
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        p = Path(path)
        try:
            user = json.loads(p.read_text())
        except OSError as exc:
            raise ConfigError(f"{p}: cannot read config ({exc.strerror})") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{p}: invalid JSON ({exc})") from None
        if not isinstance(user, dict):
            raise ConfigError(f"{p}: config must be a JSON object")
        cfg = _merge(cfg, user)
    if overrides:
        cfg = _merge(cfg, overrides)
    seed = cfg["seed"]
    if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed <= U64_MAX:
        raise ConfigError(f"seed must be an integer in [0, 2**64), got {seed!r}")
    out = Path(cfg["out"]).resolve()
    cfg["out"] = str(out)
    cfg["calibrate"]["traces_dir"] = str(Path(cfg["calibrate"]["traces_dir"] or out / "synth").resolve())
    cfg["evaluate"]["param_map"] = str(Path(cfg["evaluate"]["param_map"]
                                            or out / "calibration" / "param_map.json").resolve())
    plant_config(cfg)  # validate early
    return cfg


def config_hash(cfg: dict) -> str:
    canon = {k: v for k, v in cfg.items() if k != "out"}
    canon["calibrate"] = {k: v for k, v in cfg["calibrate"].items() if k != "traces_dir"}
    canon["evaluate"] = {k: v for k, v in cfg["evaluate"].items() if k != "param_map"}
    text = json.dumps(canon, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def plant_config(cfg: dict, mismatch_pct: float = 0.0) -> PlantConfig:
    d = {k: v for k, v in cfg["plant"].items() if v is not None}
    d["seed"] = cfg["seed"]
    d["mismatch_pct"] = mismatch_pct
    return PlantConfig.from_dict(d)


def _meta(cfg: dict, command: str) -> dict:
    return {"config_hash": config_hash(cfg), "seed": cfg["seed"], "command": command,
            "version": __version__}


def _meta_line(cfg: dict, command: str) -> str:
    m = _meta(cfg, command)
    return " ".join(f"{k}={m[k]}" for k in sorted(m))


def _write_json(path: Path, data: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def trace_name(dof: int, angle: float) -> str:
    return f"phi{dof + 1}_other{int(round(angle)):+03d}.csv"


# -- commands ---------------------------------------------------------------------------
def cmd_synth(cfg: dict) -> list[Path]:
    out = Path(cfg["out"]) / "synth"
    out.mkdir(parents=True, exist_ok=True)
    pc = plant_config(cfg)
    comment = _meta_line(cfg, "synth")
    written = []
    for dof in (0, 1):
        for i, angle in enumerate(GRID_ANGLES):
            seed = np.random.SeedSequence([cfg["seed"], dof, i])
            trace = run_sweep_protocol(pc, dof, angle, seed=seed)
            path = out / trace_name(dof, angle)
            trace.save(path, comment)
            written.append(path)
    truth = out / "plant_truth.json"
    _write_json(truth, {"meta": _meta(cfg, "synth"), "plant": pc.to_dict()})
    written.append(truth)
    return written


def _load_traces(directory: Path, sample_rate: float) -> dict[tuple[int, float], MotionTrace]:
    expected = len(sweep_commands(0, 0.0, sample_rate)[0])
    traces = {}
    for dof in (0, 1):
        for angle in GRID_ANGLES:
            path = directory / trace_name(dof, angle)
            if not path.exists():
                raise TraceFormatError(f"{path}: missing sweep trace")
            trace = MotionTrace.load(path)
            if len(trace) < expected:
                raise TraceFormatError(f"{path}: {len(trace)} samples, the two-cycle sweep "
                                       f"needs {expected} (truncated file?)")
            traces[(dof, angle)] = trace
    return traces


def cmd_calibrate(cfg: dict) -> list[Path]:
    c = cfg["calibrate"]
    traces = _load_traces(Path(c["traces_dir"]), cfg["plant"]["sample_rate"])
    opts = CalibrationOptions(omega=c["omega"], tie_backlash=bool(c["tie_backlash"]), b_max=c["b_max"],
                              min_prominence=c["min_prominence"], cycle_warn=c["cycle_warn"])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        pmap, report = calibrate(traces, opts)
    out = Path(cfg["out"]) / "calibration"
    meta = _meta(cfg, "calibrate")
    pm_path, q_path = out / "param_map.json", out / "quality.json"
    _write_json(pm_path, {**pmap.to_dict(), "meta": meta})
    _write_json(q_path, {"meta": meta, **report.to_dict()})
    return [pm_path, q_path]


def load_param_map(path: str | Path) -> ParamMap:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read parameter map ({exc.strerror})") from None
    data.pop("meta", None)
    return ParamMap.from_dict(data)


def scenarios_from_config(cfg: dict) -> list[Scenario]:
    e = cfg["evaluate"]
    if e["scenarios"] is None:
        return standard_suite(int(e["trials"]), cfg["seed"], tuple(e["fixed_angles"]), bool(e["two_dof"]))
    try:
        return [Scenario.from_dict({"trials": e["trials"], "seed": cfg["seed"], **s}) for s in e["scenarios"]]
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"invalid scenario list: {exc}") from None


def _slug(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9]+", "_", name).strip("_")


def _plots(run: TrialRun, name: str, meta: str, dofs) -> dict[str, str]:
    charts = {}
    for d in dofs:
        charts[f"{_slug(name)}_phi{d + 1}_time.svg"] = line_chart(
            [("desired", run.t, run.desired[:, d]), ("output", run.t, run.output[:, d]),
             ("command", run.t, run.command[:, d])],
            title=f"{name}: phi{d + 1} vs time", xlabel="time [s]", ylabel="angle [deg]",
            metadata=meta, dashed=[True, False, False])
        charts[f"{_slug(name)}_phi{d + 1}_io.svg"] = line_chart(
            [("ideal", run.desired[run.window, d], run.desired[run.window, d]),
             ("output", run.desired[run.window, d], run.output[run.window, d])],
            title=f"{name}: phi{d + 1} desired vs output", xlabel="desired [deg]",
            ylabel="output [deg]", metadata=meta, dashed=[True, False])
    return charts


def cmd_evaluate(cfg: dict) -> list[Path]:
    e = cfg["evaluate"]
    pmap = load_param_map(e["param_map"])
    pc = plant_config(cfg, float(e["mismatch_pct"]))
    scenarios = scenarios_from_config(cfg)
    report: ExperimentReport = run_suite(scenarios, pc, pmap,
                                         keep_examples=bool(e["write_traces"] or e["write_plots"]))
    out = Path(cfg["out"]) / "evaluation"
    meta = _meta(cfg, "evaluate")
    written = []
    rp = out / "report.json"
    _write_json(rp, {"meta": meta, **report.to_dict()})
    tp = out / "tables.txt"
    tp.write_text(f"# {_meta_line(cfg, 'evaluate')}\n" + format_tables(report) + "\n")
    written += [rp, tp]
    line = _meta_line(cfg, "evaluate")
    for r in report.results:
        run = r.example
        if run is None:
            continue
        if e["write_traces"]:
            p = out / "traces" / f"{_slug(r.scenario.name)}.csv"
            p.parent.mkdir(parents=True, exist_ok=True)
            MotionTrace(run.t, run.command, run.output, run.current).save(p, line)
            written.append(p)
        if e["write_plots"]:
            for fname, svg in _plots(run, r.scenario.name, line, r.scenario.dofs).items():
                p = out / "plots" / fname
                p.parent.mkdir(parents=True, exist_ok=True)
                p.write_text(svg)
                written.append(p)
    return written


def cmd_all(cfg: dict) -> list[Path]:
    return cmd_synth(cfg) + cmd_calibrate(cfg) + cmd_evaluate(cfg)


COMMANDS = {"synth": cmd_synth, "calibrate": cmd_calibrate, "evaluate": cmd_evaluate, "all": cmd_all}


# -- entry point ------------------------------------------------------------------------------
class _JsonArgumentParser(argparse.ArgumentParser):
    def error(self, message: str):
        _emit_error("UsageError", message, None)
        raise SystemExit(2)


def _emit_error(kind: str, message: str, command: str | None) -> None:
    sys.stderr.write(json.dumps({"error": kind, "message": message, "command": command},
                                sort_keys=True) + "\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _JsonArgumentParser(prog="tsm-hyst", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_JsonArgumentParser)
    for name in COMMANDS:
        p = sub.add_parser(name, help=COMMANDS[name].__doc__ or name)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, help="master seed (0 .. 2**64-1)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--noise", type=float, help="current noise sigma in amps")
        p.add_argument("--mismatch", type=float, help="plant coupling mismatch in percent (evaluation)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    overrides: dict[str, Any] = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["out"] = args.out
    if args.noise is not None:
        overrides["plant"] = {"noise": args.noise}
    if args.mismatch is not None:
        overrides["evaluate"] = {"mismatch_pct": args.mismatch}
    try:
        cfg = load_config(args.config, overrides)
        written = COMMANDS[args.command](cfg)
    except (HysteresisError, OSError, ValueError, KeyError) as exc:
        _emit_error(type(exc).__name__, str(exc), args.command)
        return 1
    print(json.dumps({"command": args.command, "config_hash": config_hash(cfg), "seed": cfg["seed"],
                      "written": len(written), "out": cfg["out"]}, sort_keys=True))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
