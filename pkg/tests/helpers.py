from __future__ import annotations

import numpy as np

from tsm_hysteresis.calibration import GRID_ANGLES
from tsm_hysteresis.model import HysteresisParams
from tsm_hysteresis.plant import PlantConfig, run_sweep_protocol, single_params_map


def fixed_plant(params: HysteresisParams, **kw) -> PlantConfig:
    """Plant whose parameters ignore the other DOF."""
    return PlantConfig(true_map=single_params_map(params), **kw)


def sweep_set(config: PlantConfig, seed: int = 0) -> dict:
    """One sweep per (dof, grid angle), each with its own noise stream."""
    out = {}
    for dof in (0, 1):
        for i, angle in enumerate(GRID_ANGLES):
            out[(dof, angle)] = run_sweep_protocol(config, dof, angle,
                                                   seed=np.random.SeedSequence([seed, dof, i]))
    return out


# acceptance verdicts, printed by the terminal summary hook
VERDICTS: dict[int, tuple[str, bool, str]] = {}


def verdict(number: int, title: str, ok: bool, detail: str) -> None:
    VERDICTS[number] = (title, bool(ok), detail)
    print(f"criterion {number} {'PASS' if ok else 'FAIL'}: {title}: {detail}")
