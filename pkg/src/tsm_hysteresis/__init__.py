"""Dead-zone and backlash hysteresis modelling, identification and compensation
for two-DOF tendon-sheath devices."""

from .compensator import CompensatorState, compensate, compensate_step, init_compensator, refresh_params
from .model import Branch, HysteresisModel, HysteresisParams, ModelState, reset, simulate, step

__version__ = "0.1.0"

__all__ = [
    "Branch", "CompensatorState", "HysteresisModel", "HysteresisParams", "ModelState",
    "compensate", "compensate_step", "init_compensator", "refresh_params", "reset",
    "simulate", "step",
]
