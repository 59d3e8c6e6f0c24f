"""Warping functions g(r) in log form and the model manifolds built on them.

A warping function is stored through ``log g`` and its first two
derivatives; plain values are derived on demand.  This keeps ``g^{m-1}``
usable when it spans hundreds of orders of magnitude.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np
from scipy.interpolate import BPoly, CubicHermiteSpline, PchipInterpolator
from scipy.special import gammaln

from .formula import Expr, parse

POLE_SLOPE_TOL = 1e-6
POLE_RATIO_TOL = 1e-4
_SLOPE_PROBE = 1e-8
_MAX_LOG = 709.0


class WarpingError(ValueError):
    pass


class NonPositiveValue(WarpingError):
    pass


class NonPositive(NonPositiveValue):
    pass


class DomainExceeded(WarpingError):
    pass


class PoleViolation(WarpingError):
    pass


# ---------------------------------------------------------------------------
# log-function pieces; each returns (l, l', l'') for l = log g


class LogPiece:
    domain: tuple[float, float] = (0.0, math.inf)

    def logd(self, r: np.ndarray):
        raise NotImplementedError


class ExprPiece(LogPiece):
    def __init__(self, expr: Union[Expr, str], variable: str = "r"):
        self.expr = parse(expr, variable) if isinstance(expr, str) else expr
        self.source = expr if isinstance(expr, str) else str(expr)

    def logd(self, r):
        s, l, d1, d2 = self.expr.log_eval(r)
        bad = ~(s > 0)
        if np.any(bad):
            where = np.asarray(r)[bad] if np.ndim(r) else r
            raise NonPositiveValue(f"g <= 0 for {self.source} at r = {np.ravel(where)[0]:g}")
        return l, d1, d2 - d1 * d1

    def __repr__(self):
        return f"ExprPiece({self.source!r})"


class TablePiece(LogPiece):
    """Tabulated g interpolated through log(g/r), which stays smooth at the pole.

    With ``dlog`` supplied the interpolant is a cubic Hermite spline using
    the exact slopes, quintic when ``d2log`` is supplied as well; otherwise
    monotone cubic (PCHIP) interpolation.
    """

    def __init__(self, r, log_g, dlog_g=None, d2log_g=None):
        r = np.asarray(r, dtype=float)
        log_g = np.asarray(log_g, dtype=float)
        if r.ndim != 1 or r.size < 3 or np.any(np.diff(r) <= 0):
            raise WarpingError("table radii must be strictly increasing with at least 3 rows")
        if r[0] < 0:
            raise WarpingError("table radii must be non-negative")
        self.r = r
        self.domain = (float(r[0]), float(r[-1]))
        tilde = np.empty_like(r)
        pos = r > 0
        tilde[pos] = log_g[pos] - np.log(r[pos])
        if not pos[0]:
            # g(0) = 0; log(g/r) is even in r for a smooth pole, fit a + b r^2
            r1, r2 = r[1] ** 2, r[2] ** 2
            tilde[0] = (tilde[1] * r2 - tilde[2] * r1) / (r2 - r1)
        if not np.all(np.isfinite(tilde)):
            raise NonPositiveValue("table contains non-positive g values")
        if dlog_g is not None and d2log_g is not None:
            dlog_g = np.asarray(dlog_g, dtype=float)
            d2log_g = np.asarray(d2log_g, dtype=float)
            dtilde = np.empty_like(r)
            d2tilde = np.empty_like(r)
            dtilde[pos] = dlog_g[pos] - 1.0 / r[pos]
            d2tilde[pos] = d2log_g[pos] + 1.0 / r[pos] ** 2
            if not pos[0]:
                # tilde = a + b r^2 + c r^4 matched to slope and curvature at the next row
                r1 = r[1]
                c = (d2tilde[1] - dtilde[1] / r1) / (8.0 * r1 * r1)
                b = (dtilde[1] - 4.0 * c * r1 ** 3) / (2.0 * r1)
                tilde[0] = tilde[1] - b * r1 * r1 - c * r1 ** 4
                dtilde[0] = 0.0
                d2tilde[0] = 2.0 * b
            self._spline = BPoly.from_derivatives(r, np.column_stack([tilde, dtilde, d2tilde]), extrapolate=False)
        elif dlog_g is None:
            self._spline = PchipInterpolator(r, tilde, extrapolate=False)
        else:
            dlog_g = np.asarray(dlog_g, dtype=float)
            dtilde = np.empty_like(r)
            dtilde[pos] = dlog_g[pos] - 1.0 / r[pos]
            if not pos[0]:
                dtilde[0] = 0.0
            self._spline = CubicHermiteSpline(r, tilde, dtilde, extrapolate=False)
        self._d1 = self._spline.derivative(1)
        self._d2 = self._spline.derivative(2)

    def logd(self, r):
        r = np.asarray(r, dtype=float)
        lo, hi = self.domain
        if np.any(r > hi * (1 + 1e-12)) or np.any(r < lo * (1 - 1e-12)):
            raise DomainExceeded(f"radius outside tabulated range [{lo:g}, {hi:g}]")
        rc = np.clip(r, lo, hi)
        with np.errstate(divide="ignore"):
            inv = 1.0 / rc
            return self._spline(rc) + np.log(rc), self._d1(rc) + inv, self._d2(rc) - inv * inv

    @classmethod
    def from_csv(cls, path: Union[str, Path]) -> "TablePiece":
        rows = []
        with open(path, newline="", encoding="utf-8") as fh:
            for line in csv.reader(fh):
                if not line or line[0].strip().startswith("#"):
                    continue
                try:
                    rows.append((float(line[0]), float(line[1])))
                except ValueError:
                    if rows:
                        raise WarpingError(f"bad CSV row {line!r} in {path}")
        arr = np.array(rows)
        if arr.size == 0:
            raise WarpingError(f"no data rows in {path}")
        r, g = arr[:, 0], arr[:, 1]
        if np.any(g[r > 0] <= 0):
            raise NonPositiveValue(f"non-positive g in {path}")
        with np.errstate(divide="ignore"):
            return cls(r, np.log(g))


class CallablePiece(LogPiece):
    """Wraps ``fn(r) -> (l, l', l'')``."""

    def __init__(self, fn: Callable, domain=(0.0, math.inf), label: str = "callable"):
        self.fn = fn
        self.domain = domain
        self.label = label

    def logd(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r > self.domain[1] * (1 + 1e-12)):
            raise DomainExceeded(f"radius beyond {self.domain[1]:g} for {self.label}")
        return self.fn(r)

    def __repr__(self):
        return f"CallablePiece({self.label})"


def _as_piece(obj, variable="r") -> LogPiece:
    if isinstance(obj, LogPiece):
        return obj
    if isinstance(obj, (str, Expr)):
        return ExprPiece(obj, variable)
    raise TypeError(f"cannot build a warping piece from {type(obj).__name__}")


def _smoothstep(s):
    """Quintic Hermite step with vanishing first and second derivatives at 0 and 1."""
    s = np.clip(s, 0.0, 1.0)
    w = s * s * s * (10.0 + s * (-15.0 + 6.0 * s))
    w1 = 30.0 * s * s * (1.0 - s) ** 2
    w2 = 60.0 * s * (1.0 - s) * (1.0 - 2.0 * s)
    return w, w1, w2


@dataclass(frozen=True)
class LogEval:
    log_g: float
    dlog_g: float
    valid: bool


@dataclass(frozen=True, eq=False)
class WarpingFunction:
    """g(r) through its logarithm.

    ``tail`` takes over beyond ``blend_window[1]`` (or beyond the end of a
    tabulated body when no window is given); inside the window log g is
    blended with a quintic Hermite step.
    """

    body: LogPiece
    tail: Optional[LogPiece] = None
    blend_window: Optional[tuple[float, float]] = None
    label: str = ""

    def __post_init__(self):
        if self.blend_window is not None:
            a, b = self.blend_window
            if not 0 <= a < b:
                raise WarpingError(f"invalid blend window {self.blend_window}")
            if self.tail is None:
                raise WarpingError("blend window given without a tail")

    @property
    def domain_end(self) -> float:
        if self.tail is not None:
            return self.tail.domain[1]
        return self.body.domain[1]

    @property
    def tail_start(self) -> float:
        if self.blend_window is not None:
            return self.blend_window[1]
        if self.tail is not None:
            return self.body.domain[1]
        return math.inf

    def logd(self, r):
        """Vectorised (log g, (log g)', (log g)'')."""
        r = np.asarray(r, dtype=float)
        if np.any(r < 0):
            raise DomainExceeded("negative radius")
        if np.any(r > self.domain_end * (1 + 1e-12)):
            raise DomainExceeded(f"radius beyond {self.domain_end:g} and no tail declared")
        if self.tail is None:
            return self.body.logd(r)
        if self.blend_window is None:
            cut = self.body.domain[1]
            out = [np.empty_like(r) for _ in range(3)]
            lo = r <= cut
            for mask, piece in ((lo, self.body), (~lo, self.tail)):
                if np.any(mask):
                    vals = piece.logd(r[mask])
                    for o, v in zip(out, vals):
                        o[mask] = v
            return tuple(out)
        a, b = self.blend_window
        out = [np.empty_like(r) for _ in range(3)]
        lo, hi = r <= a, r >= b
        mid = ~(lo | hi)
        if np.any(lo):
            for o, v in zip(out, self.body.logd(r[lo])):
                o[lo] = v
        if np.any(hi):
            for o, v in zip(out, self.tail.logd(r[hi])):
                o[hi] = v
        if np.any(mid):
            rm = r[mid]
            lb, lb1, lb2 = self.body.logd(rm)
            lt, lt1, lt2 = self.tail.logd(rm)
            w, w1, w2 = _smoothstep((rm - a) / (b - a))
            w1 = w1 / (b - a)
            w2 = w2 / (b - a) ** 2
            diff = lt - lb
            out[0][mid] = lb + w * diff
            out[1][mid] = lb1 + w * (lt1 - lb1) + w1 * diff
            out[2][mid] = lb2 + w * (lt2 - lb2) + 2.0 * w1 * (lt1 - lb1) + w2 * diff
        return tuple(out)

    def log(self, r):
        return self.logd(r)[0]

    def value(self, r):
        with np.errstate(over="ignore"):
            return np.exp(self.log(r))

    def curvature(self, r):
        """Radial sectional curvature -g''/g of the model."""
        _, l1, l2 = self.logd(r)
        return -(l2 + l1 * l1)

    def describe(self) -> dict:
        out = {"label": self.label, "body": repr(self.body)}
        if self.tail is not None:
            out["tail"] = repr(self.tail)
        if self.blend_window is not None:
            out["blend_window"] = list(self.blend_window)
        return out


def warping(body, tail=None, blend_window=None, label: str = "", variable: str = "r") -> WarpingFunction:
    """Build a warping function from formula strings, expressions or pieces."""
    t = None if tail is None else _as_piece(tail, variable)
    if not label:
        label = str(body) if tail is None else f"{body} -> {tail}"
    return WarpingFunction(_as_piece(body, variable), t, None if blend_window is None else tuple(blend_window), label)


def eval_log(g: WarpingFunction, r: float) -> LogEval:
    """log g(r) and g'(r)/g(r) at a single radius."""
    if r < 0:
        raise DomainExceeded("negative radius")
    l, d1, _ = g.logd(np.array([float(r)]))
    lg, dl = float(l[0]), float(d1[0])
    return LogEval(lg, dl, bool(np.isfinite(lg) and abs(lg) < _MAX_LOG))


def sphere_constant(m: int) -> float:
    """Volume of the unit (m-1)-sphere, 2 pi^{m/2} / Gamma(m/2)."""
    if m < 1:
        raise ValueError("dimension must be positive")
    return float(math.exp(math.log(2.0) + 0.5 * m * math.log(math.pi) - gammaln(0.5 * m)))


@dataclass(frozen=True, eq=False)
class ModelManifold:
    dim: int
    g: WarpingFunction
    pole_radius_eps: float = 1e-3
    name: str = ""

    @property
    def sphere_constant(self) -> float:
        return sphere_constant(self.dim)

    def log_area_density(self, r):
        """log g^{m-1}(r)."""
        return (self.dim - 1) * self.g.log(r)

    def drift(self, r):
        """(m-1) g'/g, the first-order coefficient of the radial Laplacian."""
        return (self.dim - 1) * self.g.logd(r)[1]

    @property
    def label(self) -> str:
        return self.name or f"m={self.dim}, g={self.g.label}"


def make_model(m: int, g: WarpingFunction, pole_radius_eps: float = 1e-3, name: str = "",
               check_radius: float = 64.0) -> ModelManifold:
    """Validate the pole conditions and positivity, then assemble the model."""
    if int(m) != m or m < 2:
        raise ValueError(f"model dimension must be an integer >= 2, got {m}")
    eps = float(pole_radius_eps)
    l, d1, _ = g.logd(np.array([_SLOPE_PROBE, eps]))
    slope0 = math.exp(l[0]) * d1[0]
    ratio = math.exp(l[1]) / eps
    if abs(slope0 - 1.0) > POLE_SLOPE_TOL:
        raise PoleViolation(f"g'(0) = {slope0:.6g}, expected 1")
    if abs(ratio - 1.0) > POLE_RATIO_TOL:
        raise PoleViolation(f"g(eps)/eps = {ratio:.6g} at eps = {eps:g}, expected 1")
    top = min(check_radius, g.domain_end)
    rs = np.geomspace(eps, top, 2048)
    try:
        lv = g.log(rs)
    except NonPositiveValue as exc:
        raise NonPositive(str(exc)) from exc
    if not np.all(np.isfinite(lv)):
        raise NonPositive("g is not positive on the sampled range")
    return ModelManifold(int(m), g, eps, name)
