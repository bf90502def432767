"""Signal primitives for current-trace analysis: filtering, change points, peaks."""

from __future__ import annotations

import numpy as np
from scipy import signal as _sps

from ..errors import NyquistViolation


def lowpass_filter(x, sample_rate: float, order: int = 3, cutoff: float = 20.0) -> np.ndarray:
    """Zero-phase Butterworth low-pass (forward-backward, so attenuation doubles)."""
    if not sample_rate > 2 * cutoff:
        raise NyquistViolation(f"sample rate {sample_rate:g} Hz must exceed 2 x cutoff ({cutoff:g} Hz)")
    x = np.asarray(x, dtype=float)
    sos = _sps.butter(order, cutoff, btype="low", fs=sample_rate, output="sos")
    padlen = min(3 * (2 * len(sos) + 1), max(x.size - 1, 0))
    return _sps.sosfiltfilt(sos, x, padlen=padlen)


def _prefix(a: np.ndarray) -> np.ndarray:
    return np.concatenate(([0.0], np.cumsum(a)))


class _SegmentCost:
    """O(1) within-segment squared error for half-open sample ranges ``[i, j)``."""

    def __init__(self, y: np.ndarray, statistic: str, x: np.ndarray | None):
        y = y - y.mean()
        self.statistic = statistic
        self.n = _prefix(np.ones_like(y))
        self.sy = _prefix(y)
        self.syy = _prefix(y * y)
        if statistic == "linear":
            x = np.arange(y.size, dtype=float) if x is None else np.asarray(x, dtype=float)
            x = x - x.mean()
            self.sx = _prefix(x)
            self.sxx = _prefix(x * x)
            self.sxy = _prefix(x * y)
        elif statistic != "mean":
            raise ValueError(f"unknown statistic {statistic!r}")

    def __call__(self, i, j):
        n = self.n[j] - self.n[i]
        sy = self.sy[j] - self.sy[i]
        cost = (self.syy[j] - self.syy[i]) - sy * sy / n
        if self.statistic == "linear":
            sx = self.sx[j] - self.sx[i]
            cxx = (self.sxx[j] - self.sxx[i]) - sx * sx / n
            cxy = (self.sxy[j] - self.sxy[i]) - sx * sy / n
            with np.errstate(divide="ignore", invalid="ignore"):
                explained = np.where(cxx > 1e-12, cxy * cxy / np.where(cxx > 1e-12, cxx, 1.0), 0.0)
            cost = cost - explained
        return np.maximum(cost, 0.0)


def find_change_points(signal, n_points: int, statistic: str = "mean", x=None,
                       min_size: int | None = None) -> list[int]:
    """Exact least-squares segmentation into ``n_points + 1`` pieces.

    Returns the first index of every new segment, ascending. ``statistic``
    is ``"mean"`` (piecewise-constant fit) or ``"linear"`` (piecewise-linear
    fit against ``x``, sample index by default). Solved by dynamic
    programming over all split positions.
    """
    y = np.asarray(signal, dtype=float)
    if n_points < 1:
        return []
    if min_size is None:
        min_size = 2 if statistic == "linear" else 1
    if y.size < 2 * n_points or y.size < (n_points + 1) * min_size:
        raise ValueError(f"signal of length {y.size} too short for {n_points} change points")
    cost = _SegmentCost(y, statistic, x)
    n = y.size

    if n_points == 1:
        k = np.arange(min_size, n - min_size + 1)
        total = cost(0, k) + cost(k, n)
        return [int(k[np.argmin(total)])]

    # best[m, j]: minimal cost of splitting y[:j] into m + 1 segments
    best = np.full((n_points + 1, n + 1), np.inf)
    arg = np.zeros((n_points + 1, n + 1), dtype=int)
    ends = np.arange(n + 1)
    best[0, min_size:] = cost(0, ends[min_size:])
    for m in range(1, n_points + 1):
        for j in range((m + 1) * min_size, n + 1):
            starts = np.arange(m * min_size, j - min_size + 1)
            total = best[m - 1, starts] + cost(starts, j)
            pick = int(np.argmin(total))
            best[m, j] = total[pick]
            arg[m, j] = starts[pick]
    splits = []
    j = n
    for m in range(n_points, 0, -1):
        j = arg[m, j]
        splits.append(int(j))
    return sorted(splits)


def segmentation_cost(signal, splits, statistic: str = "mean", x=None) -> float:
    """Total within-segment squared error of a given segmentation."""
    y = np.asarray(signal, dtype=float)
    cost = _SegmentCost(y, statistic, x)
    bounds = [0, *splits, y.size]
    return float(sum(cost(a, b) for a, b in zip(bounds[:-1], bounds[1:])))


def find_peaks(signal, min_prominence: float = 0.0, return_prominence: bool = False):
    """Indices of local maxima whose topographic prominence is at least ``min_prominence``."""
    if min_prominence < 0:
        raise ValueError("min_prominence must be >= 0")
    y = np.asarray(signal, dtype=float)
    idx, props = _sps.find_peaks(y, prominence=min_prominence)
    if return_prominence:
        return idx, props["prominences"]
    return idx
