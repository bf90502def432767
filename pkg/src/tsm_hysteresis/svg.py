"""Minimal dependency-free SVG line charts."""

from __future__ import annotations

import math
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#000000", "#1f5fbf", "#d62728", "#2ca02c", "#9467bd")


def _nice_ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step) * step
    ticks = []
    v = start
    while v <= hi + 1e-9 * step:
        ticks.append(round(v, 10))
        v += step
    return ticks


def line_chart(series: Sequence[tuple[str, Sequence[float], Sequence[float]]], title: str = "",
               xlabel: str = "", ylabel: str = "", width: int = 640, height: int = 400,
               metadata: str = "", max_points: int = 2000, dashed: Sequence[bool] | None = None) -> str:
    """Render ``(label, xs, ys)`` series as an SVG document string."""
    left, right, top, bottom = 64, 16, 36, 48
    pw, ph = width - left - right, height - top - bottom
    finite = [(np.asarray(x, float), np.asarray(y, float)) for _, x, y in series]
    xs = np.concatenate([x[np.isfinite(y)] for x, y in finite]) if finite else np.array([0.0, 1.0])
    ys = np.concatenate([y[np.isfinite(y)] for _, y in finite]) if finite else np.array([0.0, 1.0])
    x0, x1 = (float(xs.min()), float(xs.max())) if xs.size else (0.0, 1.0)
    y0, y1 = (float(ys.min()), float(ys.max())) if ys.size else (0.0, 1.0)
    if x1 <= x0:
        x1 = x0 + 1.0
    if y1 <= y0:
        y0, y1 = y0 - 1.0, y1 + 1.0

    def px(v):
        return left + (v - x0) / (x1 - x0) * pw

    def py(v):
        return top + ph - (v - y0) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">']
    if metadata:
        out.append(f"<desc>{escape(metadata)}</desc>")
    out.append(f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>')
    out.append(f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>')
    out.append(f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#888"/>')
    for v in _nice_ticks(x0, x1):
        out.append(f'<line x1="{px(v):.2f}" y1="{top + ph}" x2="{px(v):.2f}" y2="{top + ph + 4}" stroke="#888"/>')
        out.append(f'<text x="{px(v):.2f}" y="{top + ph + 18}" text-anchor="middle">{v:g}</text>')
    for v in _nice_ticks(y0, y1):
        out.append(f'<line x1="{left - 4}" y1="{py(v):.2f}" x2="{left}" y2="{py(v):.2f}" stroke="#888"/>')
        out.append(f'<text x="{left - 8}" y="{py(v) + 4:.2f}" text-anchor="end">{v:g}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{height - 10}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{top + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {top + ph / 2:.1f})">{escape(ylabel)}</text>')
    for i, ((label, _, _), (x, y)) in enumerate(zip(series, finite)):
        keep = np.isfinite(y)
        x, y = x[keep], y[keep]
        stride = max(1, int(math.ceil(x.size / max_points)))
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x[::stride], y[::stride]))
        color = PALETTE[i % len(PALETTE)]
        dash = ' stroke-dasharray="4 3"' if dashed is not None and dashed[i] else ""
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.2"{dash} points="{pts}"/>')
        ly = top + 14 + 16 * i
        out.append(f'<line x1="{left + 10}" y1="{ly}" x2="{left + 30}" y2="{ly}" stroke="{color}"{dash}/>')
        out.append(f'<text x="{left + 36}" y="{ly + 4}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
