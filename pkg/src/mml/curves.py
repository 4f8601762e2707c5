"""Fidelity-curve container and its delimited file format.

One curve file per (N, N_d) sweep cell, comma separated with the header

    t,f_opt,f_gauss,f_upper,f_lower,N,N_d,seed,scenario_id

Quantities a scenario does not produce are left as empty fields.  Floats are
written with shortest round-trip precision so parse(emit(curve)) == curve.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

HEADER = "t,f_opt,f_gauss,f_upper,f_lower,N,N_d,seed,scenario_id"
_COLUMNS = ("f_opt", "f_gauss", "f_upper", "f_lower")

F_FLOOR = 0.5 - 1e-9
F_CEIL = 1.0 + 1e-9


@dataclass(frozen=True)
class FidelityCurve:
    times: np.ndarray
    n_sites: int
    n_members: int
    seed: int
    scenario_id: str
    f_opt: np.ndarray | None = None
    f_gauss: np.ndarray | None = None
    f_upper: np.ndarray | None = None
    f_lower: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        object.__setattr__(self, "times", times)
        if times.size == 0 or np.any(np.diff(times) <= 0):
            raise ValueError("curve times must be strictly ascending")
        for name in _COLUMNS:
            col = getattr(self, name)
            if col is None:
                continue
            col = np.asarray(col, dtype=float)
            object.__setattr__(self, name, col)
            if col.shape != times.shape:
                raise ValueError(f"column {name} does not match the time grid")
            if np.any(col < F_FLOOR) or np.any(col > F_CEIL):
                raise ValueError(f"column {name} leaves the admissible fidelity range")

    def columns(self) -> dict:
        return {name: getattr(self, name) for name in _COLUMNS
                if getattr(self, name) is not None}

    def __eq__(self, other) -> bool:
        if not isinstance(other, FidelityCurve):
            return NotImplemented
        if (self.n_sites, self.n_members, self.seed, self.scenario_id) != \
                (other.n_sites, other.n_members, other.seed, other.scenario_id):
            return False
        if not np.array_equal(self.times, other.times):
            return False
        for name in _COLUMNS:
            a, b = getattr(self, name), getattr(other, name)
            if (a is None) != (b is None):
                return False
            if a is not None and not np.array_equal(a, b):
                return False
        return True


def _fmt(x: float) -> str:
    return repr(float(x))


def emit_curve(curve: FidelityCurve, path: str | Path) -> Path:
    path = Path(path)
    lines = [HEADER]
    cols = [getattr(curve, name) for name in _COLUMNS]
    for i, t in enumerate(curve.times):
        vals = [_fmt(t)]
        vals += [_fmt(c[i]) if c is not None else "" for c in cols]
        vals += [str(curve.n_sites), str(curve.n_members), str(curve.seed),
                 curve.scenario_id]
        lines.append(",".join(vals))
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")
    return path


def parse_curve(path: str | Path) -> FidelityCurve:
    lines = Path(path).read_text().strip().splitlines()
    if not lines or lines[0] != HEADER:
        raise ValueError(f"{path}: not a fidelity curve file")
    rows = [line.split(",") for line in lines[1:]]
    if not rows:
        raise ValueError(f"{path}: empty curve")
    times = np.array([float(r[0]) for r in rows])
    data = {}
    for idx, name in enumerate(_COLUMNS, start=1):
        if all(r[idx] == "" for r in rows):
            data[name] = None
        else:
            data[name] = np.array([float(r[idx]) for r in rows])
    first = rows[0]
    return FidelityCurve(times=times, n_sites=int(first[5]), n_members=int(first[6]),
                         seed=int(first[7]), scenario_id=first[8], **data)
