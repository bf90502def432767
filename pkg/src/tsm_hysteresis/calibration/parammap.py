"""Dead-zone and backlash parameters as functions of the coupled DOF's angle."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator

from ..errors import IncompleteGrid, OutOfDomain
from ..model import HysteresisParams

SCHEMA_VERSION = 1
GRID_ANGLES = (-90.0, -60.0, -30.0, 0.0, 30.0, 60.0, 90.0)
PARAM_NAMES = ("d_pos", "d_neg", "b_pos", "b_neg")
INTERPOLANT_KIND = "pchip"


@dataclass
class CalibrationGridPoint:
    other_dof_angle: float
    d_pos: float
    d_neg: float
    b_pos: float
    b_neg: float
    quality: dict = field(default_factory=dict)


@dataclass
class DofMap:
    """Knots and interpolants for one DOF (parameters vs. the other DOF's angle)."""

    angles: np.ndarray
    d_pos: np.ndarray
    d_neg: np.ndarray
    b_pos: np.ndarray
    b_neg: np.ndarray
    h_pos: float
    h_neg: float
    ref_pos: tuple[float, float] | None = None
    ref_neg: tuple[float, float] | None = None

    def __post_init__(self):
        self.angles = np.asarray(self.angles, dtype=float)
        order = np.argsort(self.angles)
        self.angles = self.angles[order]
        if len(self.angles) < 2 or np.any(np.diff(self.angles) <= 0):
            raise IncompleteGrid("need at least two distinct knot angles")
        for name in PARAM_NAMES:
            values = np.asarray(getattr(self, name), dtype=float)[order]
            if values.shape != self.angles.shape:
                raise IncompleteGrid(f"{name} has {values.size} knots, expected {self.angles.size}")
            setattr(self, name, values)
        self.h_pos = float(self.h_pos)
        self.h_neg = float(self.h_neg)
        self._interp = {name: PchipInterpolator(self.angles, getattr(self, name), extrapolate=False)
                        for name in PARAM_NAMES}

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.angles[0]), float(self.angles[-1])

    def table(self, other_angles) -> dict[str, np.ndarray]:
        """Interpolated D/B values at many angles (clamped to the domain)."""
        a = np.clip(np.asarray(other_angles, dtype=float), *self.domain)
        out = {name: self._interp[name](a) for name in PARAM_NAMES}
        # pin knot queries to the stored values exactly
        idx = np.searchsorted(self.angles, a)
        idx = np.clip(idx, 0, len(self.angles) - 1)
        hit = self.angles[idx] == a
        for name in PARAM_NAMES:
            out[name][hit] = getattr(self, name)[idx[hit]]
        return out

    def to_dict(self) -> dict:
        return {
            "angles": self.angles.tolist(),
            **{name: getattr(self, name).tolist() for name in PARAM_NAMES},
            "h_pos": self.h_pos,
            "h_neg": self.h_neg,
            "ref_pos": list(self.ref_pos) if self.ref_pos is not None else None,
            "ref_neg": list(self.ref_neg) if self.ref_neg is not None else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DofMap":
        expected = {"angles", *PARAM_NAMES, "h_pos", "h_neg", "ref_pos", "ref_neg"}
        if set(d) != expected:
            raise ValueError(f"DOF map keys mismatch: {sorted(set(d) ^ expected)}")
        refs = {k: tuple(d[k]) if d[k] is not None else None for k in ("ref_pos", "ref_neg")}
        return cls(d["angles"], *(d[name] for name in PARAM_NAMES), d["h_pos"], d["h_neg"], **refs)


class ParamMap:
    """Per-DOF parameter surfaces plus the device-wide slope.

    ``params(dof, angle)`` returns the :class:`HysteresisParams` of ``dof``
    when the other DOF sits at ``angle``. Queries outside the knot range are
    clamped to the boundary knot unless ``extrapolate="error"``.
    """

    def __init__(self, omega: float, dofs: Sequence[DofMap], extrapolate: str = "clamp"):
        if extrapolate not in ("clamp", "error"):
            raise ValueError("extrapolate must be 'clamp' or 'error'")
        self.omega = float(omega)
        self.dofs = tuple(dofs)
        self.extrapolate = extrapolate
        self._cache: dict[tuple[int, float], HysteresisParams] = {}

    def in_domain(self, angle: float, dof: int = 0) -> bool:
        lo, hi = self.dofs[dof].domain
        return lo <= angle <= hi

    def _check(self, dof: int, angles) -> None:
        if self.extrapolate == "error":
            lo, hi = self.dofs[dof].domain
            a = np.asarray(angles, dtype=float)
            if np.any((a < lo) | (a > hi)):
                raise OutOfDomain(f"other-DOF angle outside [{lo:g}, {hi:g}]")

    def params(self, dof: int, other_angle: float) -> HysteresisParams:
        key = (dof, float(other_angle))
        cached = self._cache.get(key)
        if cached is None:
            self._check(dof, other_angle)
            row = self.dofs[dof].table([other_angle])
            cached = self._make(dof, {k: v[0] for k, v in row.items()})
            if len(self._cache) < 4096:
                self._cache[key] = cached
        return cached

    def params_series(self, dof: int, other_angles) -> list[HysteresisParams]:
        """Parameters for a whole trajectory of the other DOF (vectorized lookup)."""
        self._check(dof, other_angles)
        tab = self.dofs[dof].table(other_angles)
        out: list[HysteresisParams] = []
        last_key = None
        for key in zip(*(tab[name].tolist() for name in PARAM_NAMES)):
            if key != last_key:
                current = self._make(dof, dict(zip(PARAM_NAMES, key)))
                last_key = key
            out.append(current)
        return out

    def _make(self, dof: int, row: dict) -> HysteresisParams:
        m = self.dofs[dof]
        return HysteresisParams(row["d_pos"], row["d_neg"], row["b_pos"], row["b_neg"],
                                m.h_pos, m.h_neg, self.omega)

    def validate(self, step_deg: float = 1.0) -> None:
        """Raise if any in-domain angle yields an invalid parameter set."""
        for dof, m in enumerate(self.dofs):
            lo, hi = m.domain
            angles = np.append(np.arange(lo, hi, step_deg), hi)
            self.params_series(dof, angles)

    def perturbed(self, pct: float, rng: np.random.Generator) -> "ParamMap":
        """Copy with every D/B knot scaled by an independent factor in ``1 +/- pct/100``."""
        dofs = []
        for m in self.dofs:
            scaled = {name: getattr(m, name) * (1.0 + rng.uniform(-1, 1, m.angles.size) * pct / 100.0)
                      for name in PARAM_NAMES}
            dofs.append(DofMap(m.angles, **scaled, h_pos=m.h_pos, h_neg=m.h_neg,
                               ref_pos=m.ref_pos, ref_neg=m.ref_neg))
        return ParamMap(self.omega, dofs, self.extrapolate)

    # -- serialization ----------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "kind": INTERPOLANT_KIND,
            "omega": self.omega,
            "extrapolate": self.extrapolate,
            "dofs": [m.to_dict() for m in self.dofs],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ParamMap":
        if d.get("schema") != SCHEMA_VERSION:
            raise ValueError(f"unsupported ParamMap schema {d.get('schema')!r}")
        if d.get("kind") != INTERPOLANT_KIND:
            raise ValueError(f"unsupported interpolant kind {d.get('kind')!r}")
        extra = set(d) - {"schema", "kind", "omega", "extrapolate", "dofs", "meta"}
        if extra:
            raise ValueError(f"unknown ParamMap keys {sorted(extra)}")
        return cls(d["omega"], [DofMap.from_dict(m) for m in d["dofs"]], d.get("extrapolate", "clamp"))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "ParamMap":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def __eq__(self, other) -> bool:
        return isinstance(other, ParamMap) and self.to_dict() == other.to_dict()


def build_param_map(grids: Sequence[Sequence[CalibrationGridPoint]], omega: float,
                    heights: Sequence[tuple[float, float]],
                    refs: Sequence[tuple[tuple[float, float] | None, tuple[float, float] | None]] | None = None,
                    required_angles: Sequence[float] = GRID_ANGLES) -> ParamMap:
    """Interpolate identified grid points into a :class:`ParamMap`.

    ``grids[dof]`` holds the grid points of one DOF, ``heights[dof]`` its
    ``(h_pos, h_neg)`` pair and ``refs[dof]`` its reference points.
    """
    dofs = []
    for dof, grid in enumerate(grids):
        angles = [float(g.other_dof_angle) for g in grid]
        missing = [a for a in required_angles if not any(math.isclose(a, b) for b in angles)]
        if missing:
            raise IncompleteGrid(f"dof {dof + 1}: missing grid angles {missing}")
        if len(set(angles)) != len(angles):
            raise IncompleteGrid(f"dof {dof + 1}: duplicate grid angles")
        ref_pos, ref_neg = refs[dof] if refs is not None else (None, None)
        h_pos, h_neg = heights[dof]
        dofs.append(DofMap(angles, *([getattr(g, name) for g in grid] for name in PARAM_NAMES),
                           h_pos=h_pos, h_neg=h_neg, ref_pos=ref_pos, ref_neg=ref_neg))
    pmap = ParamMap(omega, dofs)
    pmap.validate()
    return pmap
