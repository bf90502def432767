"""Identification of dead-zone and backlash parameters from sweep traces.

Dead-zone exit (point a1): on a monotone half-sweep the current magnitude is
flat inside the dead zone and grows linearly once the tendon engages. The
exit is the corner of a continuous ``constant | rising line`` least-squares
fit against the commanded angle. An optional leading constant absorbs the
lower release level that precedes the dead zone after a reversal.

Backlash end (point a2): after a reversal the current shows a small peak and
then settles. Starting at the most prominent peak, the settle point is the
corner of a continuous ``falling line | constant`` fit (with an optional
trailing level change).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from ..errors import (
    CalibrationError,
    InsufficientEngagedData,
    MissingReference,
    NoPeak,
    NoPlateau,
    NoReversal,
)
from ..traces import MotionTrace
from .parammap import GRID_ANGLES, CalibrationGridPoint, ParamMap, build_param_map
from .signal import find_peaks, lowpass_filter

B_MAX = 30.0
CYCLE_WARN = 3.0
PEAK_PROMINENCE = 0.05
ENGAGED_MARGIN = 2.0
PEAK_CUTOFF = 2.0
MIN_PLATEAU = 20
STEP_PENALTY = 6.0
SETTLE_SAMPLES = 3


class CycleDisagreement(UserWarning):
    """Parameters extracted from the two sweep cycles differ by more than the limit."""


@dataclass
class Extraction:
    """Per-cycle results of one extraction and their average."""

    value: float
    cycles: list[float]
    residuals: list[float]

    @property
    def spread(self) -> float:
        return max(self.cycles) - min(self.cycles) if self.cycles else 0.0


# -- trace segmentation -----------------------------------------------------------
def monotone_runs(cmd) -> list[tuple[int, int, int]]:
    """Maximal monotone runs of a command as ``(start, end, sign)``; ``end`` inclusive.

    A run starts at the sample where the direction was last reversed (or at 0).
    """
    x = np.asarray(cmd, dtype=float)
    d = np.sign(np.diff(x))
    # carry the last nonzero sign through flat stretches
    for i in range(1, d.size):
        if d[i] == 0:
            d[i] = d[i - 1]
    runs = []
    start = 0
    for i in range(1, d.size):
        if d[i] != d[i - 1] and d[i] != 0 and d[i - 1] != 0:
            runs.append((start, i, int(d[i - 1])))
            start = i
    if d.size:
        runs.append((start, x.size - 1, int(d[-1])))
    return [r for r in runs if r[2] != 0]


def step_hinge_fit(y, u, min_size: int = 3, min_plateau: int = MIN_PLATEAU,
                   step_penalty: float = STEP_PENALTY) -> tuple[int, int, float, float]:
    """Least-squares fit of ``c0 | c1 + g*max(0, u - u[k])`` with ``u`` ascending.

    The leading constant ``c0`` covers ``[0, s)`` and may be empty (``s = 0``);
    the continuous hinge covers ``[s, n)`` with its corner at sample ``k``.
    Returns ``(s, k, cost, g)``; every ``(s, k)`` pair is evaluated. The
    constant part of the hinge spans at least ``min_plateau`` samples so the
    leading level cannot stand in for it. The leading level is kept only if
    it lowers the cost by more than ``step_penalty * sigma**2 * log(n)``,
    with ``sigma`` the residual scale of the fit without it.
    """
    y = np.asarray(y, dtype=float)
    u = np.asarray(u, dtype=float)
    n = y.size
    if n < 2 * min_size:
        raise ValueError(f"need at least {2 * min_size} samples, got {n}")
    y = y - y.mean()
    u = u - u.mean()

    def suffix(a):
        return np.concatenate((np.cumsum(a[::-1])[::-1], [0.0]))

    def prefix(a):
        return np.concatenate(([0.0], np.cumsum(a)))

    N, U, UU = suffix(np.ones(n)), suffix(u), suffix(u * u)
    Y, UY, YY = suffix(y), suffix(u * y), suffix(y * y)
    pn, py, pyy = prefix(np.ones(n)), prefix(y), prefix(y * y)

    k = np.arange(n)
    uk = u
    sh = U[k] - N[k] * uk
    shh = UU[k] - 2 * uk * U[k] + N[k] * uk * uk
    shy = UY[k] - uk * Y[k]

    s = np.arange(n)[:, None]
    m = N[s]
    sy = Y[s]
    det = m * shh[None, :] - sh[None, :] ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        explained = (shh[None, :] * sy ** 2 - 2 * sh[None, :] * sy * shy[None, :]
                     + m * shy[None, :] ** 2) / det
        lead_cost = np.where(pn[s] > 0, pyy[s] - py[s] ** 2 / np.maximum(pn[s], 1), 0.0)
    cost = lead_cost + YY[s] - explained
    min_plateau = min(min_plateau, max(n // 3, min_size))
    valid = (k[None, :] - s >= min_plateau - 1) & (n - k[None, :] >= min_size) & (det > 1e-12)
    valid &= (s == 0) | (s >= min_size)
    cost = np.where(valid, cost, np.inf)
    k0 = int(np.argmin(cost[0]))
    flat = int(np.argmin(cost[1:])) + n
    si, ki = divmod(flat, n)
    sigma2 = max(cost[0, k0], 0.0) / n
    if not cost[si, ki] + step_penalty * sigma2 * math.log(n) < cost[0, k0]:
        si, ki = 0, k0
    g = (m[si, 0] * shy[ki] - sh[ki] * sy[si, 0]) / det[si, ki]
    return int(si), int(ki), float(max(cost[si, ki], 0.0)), float(g)


def _oriented(trace: MotionTrace, dof: int, filtered: np.ndarray | None,
              order: int, cutoff: float) -> np.ndarray:
    if filtered is not None:
        return np.asarray(filtered, dtype=float)
    return lowpass_filter(trace.current[:, dof], trace.sample_rate, order, cutoff)


def _complete_runs(x: np.ndarray, direction: int) -> list[tuple[int, int, int]]:
    runs = monotone_runs(x)
    # keep runs that end in a reversal (the last run is cut off by the trace end)
    return [r for r in runs[:-1] if r[2] == direction] if len(runs) > 1 else []


# -- a1: dead-zone exit ---------------------------------------------------------------
def extract_dead_zone(trace: MotionTrace, dof: int, direction: int, *,
                      filtered: np.ndarray | None = None, b_max: float = B_MAX,
                      order: int = 3, cutoff: float = 20.0, detail: bool = False):
    """Commanded angle where the current leaves its dead-zone plateau.

    ``direction = +1`` gives ``d_pos`` (rising half-sweeps), ``-1`` gives
    ``d_neg``. Every completed half-sweep is used and the results averaged.
    """
    x = trace.cmd[:, dof]
    c = _oriented(trace, dof, filtered, order, cutoff)
    runs = _complete_runs(x, direction)
    if not runs:
        raise NoPlateau(f"no completed {'rising' if direction > 0 else 'falling'} half-sweep")
    values, residuals = [], []
    for start, end, _ in runs:
        seg = np.arange(start, end + 1)
        if start > 0:
            # skip the post-reversal transient
            seg = seg[np.abs(x[seg] - x[start]) >= b_max]
        if seg.size < 12:
            continue
        xs, ys = x[seg], direction * c[seg]
        _, k, cost, slope = step_hinge_fit(ys, direction * xs)
        if not slope > 0:
            continue
        values.append(float(xs[k]))
        residuals.append(math.sqrt(cost / ys.size))
    if not values:
        raise NoPlateau("no constant-current segment followed by an engaged ramp")
    result = Extraction(float(np.mean(values)), values, residuals)
    return result if detail else result.value


# -- a2: backlash end ---------------------------------------------------------------
def reversal_indices(cmd, side: int) -> list[int]:
    """Indices where the command turns around at its ``side`` extreme (+1 max, -1 min)."""
    runs = monotone_runs(cmd)
    return [runs[i + 1][0] for i in range(len(runs) - 1) if runs[i][2] == side]


def extract_backlash(trace: MotionTrace, dof: int, direction: int, *,
                     filtered: np.ndarray | None = None, b_max: float = B_MAX,
                     min_prominence: float = PEAK_PROMINENCE, require_peak: bool = False,
                     peak_cutoff: float = PEAK_CUTOFF, order: int = 3, cutoff: float = 20.0, detail: bool = False):
    """Backlash width after reversals at the ``direction`` side of the sweep.

    ``direction = +1`` measures the hold after turning down at the positive
    extreme (``b_pos``); ``-1`` the hold after turning up at the negative
    extreme (``b_neg``). Without a current peak the width is taken as 0,
    unless ``require_peak`` is set.
    """
    x = trace.cmd[:, dof]
    c = _oriented(trace, dof, filtered, order, cutoff)
    turns = reversal_indices(x, direction)
    if not turns:
        raise NoReversal(f"no reversal at the {'positive' if direction > 0 else 'negative'} extreme")
    move = -direction
    values, residuals = [], []
    for r in turns:
        idx = r + np.flatnonzero(np.abs(x[r:] - x[r]) <= b_max)
        # contiguous window from the turn on
        stop = np.flatnonzero(np.diff(idx) != 1)
        idx = idx[: stop[0] + 1] if stop.size else idx
        idx = idx[SETTLE_SAMPLES:]
        ys = move * c[idx]
        if ys.size < 16:
            continue
        # apex located on a smoother copy so noise ripples on the flanks do not win
        smooth = lowpass_filter(ys, trace.sample_rate, order, min(peak_cutoff, 0.4 * trace.sample_rate))
        peaks, prom = find_peaks(smooth, min_prominence, return_prominence=True)
        if peaks.size == 0:
            if require_peak:
                raise NoPeak(f"no current peak after the reversal at sample {r}")
            values.append(0.0)
            residuals.append(0.0)
            continue
        p = int(peaks[np.argmax(prom)])
        tail_x, tail_y = x[idx[p:]], ys[p:]
        if tail_y.size < 8:
            continue
        # mirrored: settle level first, falling pulse flank at the end; no leading
        # step, since the window ends well before the next dead zone
        u = np.abs(tail_x - x[r])
        _, k, cost, slope = step_hinge_fit(tail_y[::-1], -u[::-1], step_penalty=math.inf)
        k = tail_y.size - 1 - k
        values.append(float(u[k]))
        residuals.append(math.sqrt(cost / tail_y.size))
    if not values:
        raise NoPeak("no usable reversal window")
    result = Extraction(float(np.mean(values)), values, residuals)
    return result if detail else result.value


# -- slope and heights ---------------------------------------------------------------
def engaged_mask(trace: MotionTrace, dof: int, d_pos: float, d_neg: float,
                 margin: float = ENGAGED_MARGIN) -> np.ndarray:
    """Samples on the pulling branches: past the dead-zone exit of the direction of motion."""
    x = trace.cmd[:, dof]
    mask = np.zeros(x.size, dtype=bool)
    for start, end, sign in monotone_runs(x):
        seg = np.arange(start + 1, end + 1)
        if sign > 0:
            mask[seg[x[seg] > d_pos + margin]] = True
        else:
            mask[seg[x[seg] < d_neg - margin]] = True
    return mask


def trace_slope(trace: MotionTrace, dof: int, d_pos: float, d_neg: float,
                margin: float = ENGAGED_MARGIN, min_samples: int = 20) -> float:
    """Pooled within-segment least-squares slope of output vs command on engaged samples."""
    x, y = trace.cmd[:, dof], trace.out[:, dof]
    mask = engaged_mask(trace, dof, d_pos, d_neg, margin)
    sxy = sxx = 0.0
    count = 0
    edges = np.flatnonzero(np.diff(np.concatenate(([0], mask.astype(int), [0]))))
    for a, b in zip(edges[::2], edges[1::2]):
        if b - a < 2:
            continue
        xc = x[a:b] - x[a:b].mean()
        sxy += float(xc @ (y[a:b] - y[a:b].mean()))
        sxx += float(xc @ xc)
        count += b - a
    if count < min_samples or sxx <= 0:
        raise InsufficientEngagedData(f"only {count} engaged samples for dof {dof + 1}")
    return sxy / sxx


def fit_slope(traces: Sequence[tuple[MotionTrace, int, float, float]],
              margin: float = ENGAGED_MARGIN, stats: bool = False):
    """Average engaged-branch slope over ``(trace, dof, d_pos, d_neg)`` entries.

    With ``stats=True`` returns ``(mean, sample std)``.
    """
    if not traces:
        raise InsufficientEngagedData("no traces supplied")
    slopes = np.array([trace_slope(t, dof, dp, dn, margin) for t, dof, dp, dn in traces])
    mean = float(slopes.mean())
    if stats:
        return mean, float(slopes.std(ddof=1)) if slopes.size > 1 else 0.0
    return mean


def reference_points(trace: MotionTrace, dof: int) -> tuple[tuple[float, float], tuple[float, float]]:
    """Output at the last positive and negative command extremes of a sweep."""
    x, y = trace.cmd[:, dof], trace.out[:, dof]
    hi = np.flatnonzero(x == x.max())[-1]
    lo = np.flatnonzero(x == x.min())[-1]
    return (float(x[hi]), float(y[hi])), (float(x[lo]), float(y[lo]))


def fit_heights(omega: float, d_pos: float, d_neg: float,
                ref_pos: tuple[float, float] | None,
                ref_neg: tuple[float, float] | None) -> tuple[float, float]:
    """Dead-zone heights from reference points on the engaged branches."""
    if ref_pos is None or ref_neg is None:
        raise MissingReference("both positive and negative reference points are required")
    h_pos = ref_pos[1] - omega * (ref_pos[0] - d_pos)
    h_neg = ref_neg[1] - omega * (ref_neg[0] - d_neg)
    return h_pos, h_neg


# -- whole pipeline ---------------------------------------------------------------------
@dataclass
class CalibrationOptions:
    omega: float | None = None
    tie_backlash: bool = False
    b_max: float = B_MAX
    min_prominence: float = PEAK_PROMINENCE
    filter_order: int = 3
    filter_cutoff: float = 20.0
    cycle_warn: float = CYCLE_WARN
    angles: tuple[float, ...] = GRID_ANGLES


@dataclass
class CalibrationReport:
    omega: float
    omega_std: float
    heights: list[tuple[float, float]]
    points: list[list[CalibrationGridPoint]]
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "omega": self.omega,
            "omega_std": self.omega_std,
            "heights": [list(h) for h in self.heights],
            "grid": [[{"other_dof_angle": g.other_dof_angle, "d_pos": g.d_pos, "d_neg": g.d_neg,
                       "b_pos": g.b_pos, "b_neg": g.b_neg, "quality": g.quality} for g in grid]
                     for grid in self.points],
            "warnings": list(self.warnings),
        }


def calibrate_point(trace: MotionTrace, dof: int, other_angle: float,
                    opts: CalibrationOptions) -> CalibrationGridPoint:
    try:
        c = lowpass_filter(trace.current[:, dof], trace.sample_rate, opts.filter_order, opts.filter_cutoff)
        kw = dict(filtered=c, b_max=opts.b_max, detail=True)
        dp = extract_dead_zone(trace, dof, +1, **kw)
        dn = extract_dead_zone(trace, dof, -1, **kw)
        bp = extract_backlash(trace, dof, +1, min_prominence=opts.min_prominence, **kw)
        bn = extract_backlash(trace, dof, -1, min_prominence=opts.min_prominence, **kw)
    except CalibrationError:
        raise
    except Exception as exc:
        raise CalibrationError(dof, other_angle, exc) from exc
    b_pos, b_neg = bp.value, bn.value
    if opts.tie_backlash:
        b_pos = b_neg = 0.5 * (b_pos + b_neg)
    quality = {
        name: {"cycles": e.cycles, "spread": e.spread, "residual_rms": e.residuals}
        for name, e in (("d_pos", dp), ("d_neg", dn), ("b_pos", bp), ("b_neg", bn))
    }
    return CalibrationGridPoint(float(other_angle), dp.value, dn.value, b_pos, b_neg, quality)


def calibrate(traces: Mapping[tuple[int, float], MotionTrace],
              options: CalibrationOptions | None = None) -> tuple[ParamMap, CalibrationReport]:
    """Full pipeline over ``{(dof, other_angle): sweep trace}``.

    Heights and reference points come from the sweeps with the other DOF at 0.
    ``options.omega`` fixes the slope; by default it is fitted.
    """
    opts = options or CalibrationOptions()
    dofs = sorted({dof for dof, _ in traces})
    points: list[list[CalibrationGridPoint]] = []
    notes: list[str] = []
    for dof in dofs:
        grid = []
        for angle in sorted(a for d, a in traces if d == dof):
            gp = calibrate_point(traces[(dof, angle)], dof, angle, opts)
            for name, q in gp.quality.items():
                if q["spread"] > opts.cycle_warn:
                    msg = (f"dof {dof + 1} at other-DOF angle {angle:g}: {name} cycles differ "
                           f"by {q['spread']:.2f} deg")
                    notes.append(msg)
                    warnings.warn(msg, CycleDisagreement, stacklevel=2)
            grid.append(gp)
        points.append(grid)

    zero = []
    for dof, grid in zip(dofs, points):
        at0 = [g for g in grid if g.other_dof_angle == 0.0]
        if not at0:
            raise MissingReference(f"dof {dof + 1}: no sweep with the other DOF at 0 deg")
        zero.append(at0[0])

    try:
        entries = [(traces[(dof, g.other_dof_angle)], dof, g.d_pos, g.d_neg)
                   for dof, grid in zip(dofs, points) for g in grid]
        omega_fit, omega_std = fit_slope(entries, stats=True)
    except InsufficientEngagedData:
        if opts.omega is None:
            raise
        omega_fit, omega_std = opts.omega, 0.0
    omega = opts.omega if opts.omega is not None else omega_fit

    heights, refs = [], []
    for dof, g0 in zip(dofs, zero):
        ref_pos, ref_neg = reference_points(traces[(dof, 0.0)], dof)
        heights.append(fit_heights(omega, g0.d_pos, g0.d_neg, ref_pos, ref_neg))
        refs.append((ref_pos, ref_neg))

    pmap = build_param_map(points, omega, heights, refs, required_angles=opts.angles)
    return pmap, CalibrationReport(omega, omega_std, heights, points, notes)
