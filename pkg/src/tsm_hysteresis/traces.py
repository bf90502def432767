"""Uniformly sampled motion traces and their CSV form."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import TraceFormatError

CSV_HEADER = ("t", "phi1_cmd", "phi2_cmd", "phi1_out", "phi2_out", "c1", "c2")
UNIFORM_TOL = 1e-9


@dataclass
class MotionTrace:
    """Commanded angles, output angles and motor currents for both DOFs.

    ``cmd``, ``out`` and ``current`` have shape ``(n, 2)``; column ``k`` is DOF ``k``.
    """

    t: np.ndarray
    cmd: np.ndarray
    out: np.ndarray
    current: np.ndarray

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.cmd = np.asarray(self.cmd, dtype=float).reshape(-1, 2)
        self.out = np.asarray(self.out, dtype=float).reshape(-1, 2)
        self.current = np.asarray(self.current, dtype=float).reshape(-1, 2)
        n = self.t.size
        if n < 2:
            raise TraceFormatError(f"trace needs at least 2 samples, got {n}")
        for name in ("cmd", "out", "current"):
            if getattr(self, name).shape[0] != n:
                raise TraceFormatError(f"{name} has {getattr(self, name).shape[0]} rows, t has {n}")
        dt = np.diff(self.t)
        if np.any(dt <= 0):
            raise TraceFormatError("t must be strictly increasing")
        if np.max(np.abs(dt - dt[0])) > UNIFORM_TOL * max(1.0, self.t[-1]):
            raise TraceFormatError("t is not uniformly sampled")

    def __len__(self) -> int:
        return self.t.size

    @property
    def sample_rate(self) -> float:
        return (self.t.size - 1) / (self.t[-1] - self.t[0])

    def to_csv(self, comment: str | None = None) -> str:
        """CSV text; ``comment`` becomes a leading ``#`` line (skipped on load)."""
        buf = io.StringIO()
        if comment:
            buf.write(f"# {comment}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for i in range(self.t.size):
            w.writerow([_fmt(self.t[i]), _fmt(self.cmd[i, 0]), _fmt(self.cmd[i, 1]),
                        _fmt(self.out[i, 0]), _fmt(self.out[i, 1]),
                        _fmt(self.current[i, 0]), _fmt(self.current[i, 1])])
        return buf.getvalue()

    def save(self, path: str | Path, comment: str | None = None) -> None:
        Path(path).write_text(self.to_csv(comment))

    @classmethod
    def from_csv(cls, text: str, source: str = "<string>") -> "MotionTrace":
        lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
        rows = list(csv.reader(lines))
        if not rows or tuple(h.strip() for h in rows[0]) != CSV_HEADER:
            raise TraceFormatError(f"{source}: header must be {','.join(CSV_HEADER)}")
        body = [r for r in rows[1:] if r]
        for i, r in enumerate(body):
            if len(r) != len(CSV_HEADER):
                raise TraceFormatError(f"{source}: data row {i + 1} has {len(r)} fields, "
                                       f"expected {len(CSV_HEADER)} (truncated file?)")
        try:
            data = np.array([[float(v) for v in r] for r in body], dtype=float)
        except ValueError as exc:
            raise TraceFormatError(f"{source}: non-numeric field ({exc})") from None
        if data.ndim != 2 or data.shape[0] < 2 or data.shape[1] != len(CSV_HEADER):
            raise TraceFormatError(f"{source}: needs >= 2 rows of {len(CSV_HEADER)} columns")
        try:
            return cls(data[:, 0], data[:, 1:3], data[:, 3:5], data[:, 5:7])
        except TraceFormatError as exc:
            raise TraceFormatError(f"{source}: {exc}") from None

    @classmethod
    def load(cls, path: str | Path) -> "MotionTrace":
        path = Path(path)
        return cls.from_csv(path.read_text(), source=str(path))


def _fmt(v: float) -> str:
    return repr(float(v))
