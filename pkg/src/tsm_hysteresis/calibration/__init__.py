"""Identification of model parameters from motor-current sweeps."""

from .identify import (
    CalibrationOptions,
    CalibrationReport,
    CycleDisagreement,
    calibrate,
    extract_backlash,
    extract_dead_zone,
    fit_heights,
    fit_slope,
    reference_points,
)
from .parammap import GRID_ANGLES, CalibrationGridPoint, DofMap, ParamMap, build_param_map
from .signal import find_change_points, find_peaks, lowpass_filter

__all__ = [
    "GRID_ANGLES", "CalibrationGridPoint", "CalibrationOptions", "CalibrationReport",
    "CycleDisagreement", "DofMap", "ParamMap", "build_param_map", "calibrate",
    "extract_backlash", "extract_dead_zone", "find_change_points", "find_peaks",
    "fit_heights", "fit_slope", "lowpass_filter", "reference_points",
]
