"""Sampled radial functions."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

from .verdict import to_jsonable


class ProfileError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class RadialProfile:
    grid: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if g.ndim != 1 or g.shape != v.shape:
            raise ProfileError("grid and values must be 1-d arrays of equal length")
        if g.size > 1 and np.any(np.diff(g) <= 0):
            raise ProfileError("grid must be strictly increasing")
        if not np.all(np.isfinite(v)):
            raise ProfileError("profile values must be finite")
        g.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.grid.size

    def __call__(self, r):
        return np.interp(r, self.grid, self.values)

    def restrict(self, lo: float, hi: float) -> "RadialProfile":
        keep = (self.grid >= lo) & (self.grid <= hi)
        return RadialProfile(self.grid[keep], self.values[keep], dict(self.meta))

    @classmethod
    def from_function(cls, grid, fn, **meta) -> "RadialProfile":
        grid = np.asarray(grid, dtype=float)
        return cls(grid, np.broadcast_to(np.asarray(fn(grid), dtype=float), grid.shape).copy(), meta)

    def to_csv(self, path: Union[str, Path, None] = None, header=("r", "value")) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r, v in zip(self.grid, self.values):
            w.writerow((repr(float(r)), repr(float(v))))
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text

    def to_dict(self, samples: bool = False) -> dict:
        out = {"nodes": int(self.grid.size), "r_min": float(self.grid[0]) if self.grid.size else None,
               "r_max": float(self.grid[-1]) if self.grid.size else None, "meta": to_jsonable(self.meta)}
        if samples:
            out["r"] = self.grid.tolist()
            out["values"] = self.values.tolist()
        return out
