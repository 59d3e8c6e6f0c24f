"""Exterior Dirichlet problems on radial models, solved by exhaustion.

The radial equation (g^{m-1} h')' = q g^{m-1} h is discretized in
conservative form.  Writing phi = (m-1) log g and taking phi linear on each
grid interval gives exponentially fitted face conductances

    K = e^{phi_i} / d * z / (1 - e^{-z}),      z = phi_{i+1} - phi_i,

and matching nodal measures (the source integrated against the same
exponential weights).  Everything is assembled in log form and each row is
rescaled by its largest entry, so the linear systems stay well posed when
g^{m-1} spans thousands of orders of magnitude.  The matrices are
M-matrices: discrete maximum principle and monotone exhaustion hold
exactly, not just in the limit.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np
from scipy.integrate import solve_ivp

from .formula import parse
from .profiles import RadialProfile
from .tridiag import thomas
from .verdict import Verdict, fails, holds, inconclusive, to_jsonable
from .warping import ModelManifold

_TINY = 1e-280


class ExteriorError(ValueError):
    pass


class SingularCoefficient(ExteriorError):
    pass


class NonPositivePotential(ExteriorError):
    pass


@dataclass(frozen=True)
class ExteriorOptions:
    h0: float = 0.01
    ratio: float = 1.01
    report_radius: Optional[float] = None  # default R0 + 10
    tol: float = 1e-8
    max_doublings: int = 24
    min_outer_factor: float = 16384.0
    decay_threshold: float = 1e-6
    plateau_threshold: float = 1e-3
    flat_tolerance: float = 0.01
    monotone_slack: float = 1e-10
    max_radius: Optional[float] = None


DEFAULT_OPTIONS = ExteriorOptions()

Potential = Union[float, str, Callable[[np.ndarray], np.ndarray]]


def _potential(q: Potential) -> tuple[Callable[[np.ndarray], np.ndarray], str]:
    if callable(q):
        return q, getattr(q, "__name__", "q(r)")
    if isinstance(q, str):
        expr = parse(q, "r")
        return expr.evaluate, q
    lam = float(q)
    return (lambda r: np.full(np.shape(r), lam)), f"{lam:g}"


def _frac_q(z):
    """1/z - 1/(e^z - 1), between 0 and 1, equal to 1/2 at z = 0."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 1e-4
    zs = np.where(small, 1.0, z)
    with np.errstate(over="ignore"):
        big = 1.0 / zs - 1.0 / np.expm1(zs)
    return np.where(small, 0.5 - z / 12.0, big)


def _log_fit(z):
    """log(z / (1 - e^{-z})), the log of the exponential-fitting factor."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 1e-6
    zs = np.where(small, 1.0, z)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        pos = np.log(np.abs(zs)) - np.log1p(-np.exp(-np.abs(zs)))
        val = np.where(zs > 0, pos, pos + zs)
    return np.where(small, 0.5 * z, val)


def build_grid(R0: float, R_max: float, h0: float = 0.01, ratio: float = 1.01,
               uniform_until: Optional[float] = None) -> np.ndarray:
    """Uniform spacing h0 on [R0, uniform_until], then spacing growing by ``ratio`` per node."""
    if not 0 < R0 < R_max:
        raise ExteriorError(f"need 0 < R0 < R_max, got {R0}, {R_max}")
    u_end = min(R_max, uniform_until if uniform_until is not None else R0)
    n_u = max(1, int(math.ceil((u_end - R0) / h0 - 1e-9)))
    uniform = np.linspace(R0, u_end, n_u + 1) if u_end > R0 else np.array([R0])
    step = (u_end - R0) / n_u if u_end > R0 else h0
    pts = [uniform]
    r = uniform[-1]
    if r < R_max:
        n = int(math.ceil(math.log1p((R_max - r) * (ratio - 1.0) / step) / math.log(ratio))) + 1
        steps = step * ratio ** np.arange(1, n + 1)
        tail = r + np.cumsum(steps)
        tail = tail[tail < R_max * (1 - 1e-12)]
        pts.append(np.concatenate([tail, [R_max]]))
    return np.concatenate(pts)


class Discretization:
    """Log-domain coefficients of the radial operator on a fixed grid."""

    def __init__(self, M: ModelManifold, grid: np.ndarray, q: Potential = 0.0):
        grid = np.asarray(grid, dtype=float)
        if grid.size < 2 or np.any(np.diff(grid) <= 0) or grid[0] <= 0:
            raise ExteriorError("grid must be positive and strictly increasing")
        self.M = M
        self.grid = grid
        self.q_fn, self.q_label = _potential(q)
        qv = np.asarray(self.q_fn(grid), dtype=float) * np.ones_like(grid)
        if np.any(qv < 0) or not np.all(np.isfinite(qv)):
            raise NonPositivePotential("potential must be finite and nonnegative on the grid")
        self.q = qv
        k = M.dim - 1
        lg = M.g.log(grid)
        if not np.all(np.isfinite(lg)):
            raise SingularCoefficient("g vanishes or is not representable on the grid")
        self.phi = k * lg
        d = np.diff(grid)
        z = np.diff(self.phi)
        self.d = d
        self.z = z
        self.log_K = self.phi[:-1] - np.log(d) + _log_fit(z)
        qf = _frac_q(z)
        right = np.concatenate([d * (1.0 - qf), [0.0]])
        left = np.concatenate([[0.0], d * qf])
        with np.errstate(divide="ignore"):
            self.log_V = self.phi + np.log(right + left)
            self.log_qV = np.log(qv) + self.log_V
        self.right_half = right

    def index_at(self, r: float) -> int:
        """First node at or beyond r."""
        i = int(np.searchsorted(self.grid, r * (1 - 1e-12)))
        return min(i, self.grid.size - 1)

    def rows(self, n: int):
        """Scaled tridiagonal rows for the interior nodes 1..n-1."""
        lKL = self.log_K[: n - 1]
        lKR = self.log_K[1:n]
        lQ = self.log_qV[1:n]
        S = np.maximum(np.maximum(lKL, lKR), lQ)
        a = np.exp(lKL - S)
        c = np.exp(lKR - S)
        qq = np.exp(lQ - S)
        return a, -(a + c + qq), c

    def solve(self, n: int, inner: float, outer: float) -> np.ndarray:
        if n < 1:
            raise ExteriorError("outer radius must lie beyond the inner radius")
        h = np.empty(n + 1)
        h[0], h[n] = inner, outer
        if n == 1:
            return h
        a, b, c = self.rows(n)
        rhs = np.zeros(n - 1)
        rhs[0] -= a[0] * inner
        rhs[-1] -= c[-1] * outer
        h[1:n] = thomas(a, b, c, rhs)
        return h

    def inner_slope(self, h: np.ndarray) -> float:
        """h'(R0) recovered from the first face flux with the half-cell source correction."""
        flux = math.exp(self.log_K[0] - self.phi[0]) * (h[1] - h[0])
        return flux - self.q[0] * h[0] * self.right_half[0]

    def flux(self, h: np.ndarray):
        """Face fluxes g^{m-1} h' as (sign, log magnitude)."""
        n = h.size - 1
        dh = np.diff(h)
        with np.errstate(divide="ignore"):
            return np.sign(dh), self.log_K[:n] + np.log(np.abs(dh))


def _profile(disc: Discretization, h: np.ndarray, R0: float, Rn: float, **meta) -> RadialProfile:
    info = {"q": disc.q_label, "R0": R0, "outer_radius": Rn, "model": disc.M.label}
    info.update(meta)
    return RadialProfile(disc.grid[: h.size].copy(), h, info)


def solve_annulus(M: ModelManifold, R0: float, Rn: float, q: Potential = 1.0, inner_value: float = 1.0,
                  outer_value: float = 0.0, opts: ExteriorOptions = DEFAULT_OPTIONS,
                  grid: Optional[np.ndarray] = None) -> RadialProfile:
    """Solve (g^{m-1} h')' = q g^{m-1} h on [R0, Rn] with h(R0), h(Rn) prescribed."""
    if not 0 < R0 < Rn:
        raise ExteriorError(f"need 0 < R0 < Rn, got {R0}, {Rn}")
    if grid is None:
        report = opts.report_radius or R0 + 10.0
        grid = build_grid(R0, Rn, opts.h0, opts.ratio, report + 6.0)
    disc = Discretization(M, grid, q)
    h = disc.solve(grid.size - 1, inner_value, outer_value)
    return _profile(disc, h, R0, float(grid[-1]), inner_slope=disc.inner_slope(h))


@dataclass
class ExhaustionTrace:
    outer_radii: list
    solutions: list
    sup_deltas: list
    limit_estimate: float
    converged: bool
    far_radius: float = math.nan
    far_value: float = math.nan
    decade_value: float = math.nan
    report_radius: float = math.nan
    monotone_violation: float = 0.0
    range_ok: bool = True
    meta: dict = field(default_factory=dict)
    discretization: Optional[Discretization] = field(default=None, repr=False)

    @property
    def final(self) -> RadialProfile:
        return self.solutions[-1]

    @property
    def inner_slope(self) -> float:
        return float(self.final.meta["inner_slope"])

    def to_dict(self) -> dict:
        return to_jsonable({
            "outer_radii": self.outer_radii,
            "sup_deltas": self.sup_deltas,
            "limit_estimate": self.limit_estimate,
            "converged": self.converged,
            "far_radius": self.far_radius,
            "far_value": self.far_value,
            "decade_value": self.decade_value,
            "report_radius": self.report_radius,
            "monotone_violation": self.monotone_violation,
            "range_ok": self.range_ok,
            "inner_slope": self.inner_slope,
            "meta": self.meta,
        })

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def to_csv(self, path=None) -> str:
        return self.final.to_csv(path, header=("r", "h"))


def minimal_exterior_solution(M: ModelManifold, R0: float = 1.0, q: Potential = 1.0,
                              opts: ExteriorOptions = DEFAULT_OPTIONS) -> ExhaustionTrace:
    """Minimal positive solution with h(R0) = 1 as the limit of annulus solutions
    with outer radii R0 2^n sharing one grid."""
    if R0 <= 0:
        raise ExteriorError("R0 must be positive")
    report = opts.report_radius or R0 + 10.0
    top = R0 * 2.0 ** opts.max_doublings
    top = min(top, M.g.domain_end, opts.max_radius or math.inf)
    grid = build_grid(R0, top, opts.h0, opts.ratio, report + 6.0)
    disc = Discretization(M, grid, q)
    radii, sols, deltas = [], [], []
    prev = None
    worst = 0.0
    range_ok = True
    converged = False
    n = 0
    while True:
        n += 1
        Rn = R0 * 2.0 ** n
        idx = disc.index_at(min(Rn, top))
        h = disc.solve(idx, 1.0, 0.0)
        inner = h[1:-1]
        if inner.size and (np.any(inner < 0) or np.any(inner > 1.0 + 1e-14) or np.any(np.isnan(inner))):
            range_ok = False
        sols.append(_profile(disc, h, R0, float(grid[idx]), inner_slope=disc.inner_slope(h)))
        radii.append(float(grid[idx]))
        if prev is not None:
            common = prev.size
            worst = max(worst, float(np.max(prev - h[:common])))
            cut = disc.index_at(radii[-2] / 4.0)
            delta = float(np.max(np.abs(h[: cut + 1] - prev[: cut + 1])))
            deltas.append(delta)
            if delta < opts.tol and radii[-1] >= opts.min_outer_factor * R0:
                converged = True
                break
        prev = h
        if idx >= grid.size - 1 or n >= opts.max_doublings:
            break
    final = sols[-1]
    r_far = radii[-1] / 4.0
    r_dec = r_far / 10.0
    far = float(final(r_far))
    dec = float(final(r_dec))
    shrinking = far < dec * (1.0 - opts.flat_tolerance) or far < _TINY
    limit = 0.0 if (far < opts.decay_threshold and shrinking) else far
    return ExhaustionTrace(radii, sols, deltas, limit, converged, r_far, far, dec, report, worst, range_ok,
                           {"q": disc.q_label, "R0": R0, "model": M.label, "grid_nodes": int(grid.size)}, disc)


def decay_verdict(trace: ExhaustionTrace, opts: ExteriorOptions = DEFAULT_OPTIONS) -> Verdict:
    ev = {"limit_estimate": trace.limit_estimate, "far_radius": trace.far_radius, "far_value": trace.far_value,
          "decade_value": trace.decade_value, "converged": trace.converged,
          "outer_radius": trace.outer_radii[-1] if trace.outer_radii else math.nan}
    if not trace.converged:
        return inconclusive("exterior", "exhaustion did not converge", **ev)
    far, dec = trace.far_value, trace.decade_value
    shrinking = far < dec * (1.0 - opts.flat_tolerance) or far < _TINY
    if far < opts.decay_threshold and shrinking:
        return holds("exterior", "minimal solution decays at the far field", **ev)
    if far > opts.plateau_threshold and abs(far - dec) <= opts.flat_tolerance * dec:
        return fails("exterior", "minimal solution plateaus at the far field", **ev)
    return inconclusive("exterior", "far-field value between decay and plateau thresholds", **ev)


def cauchy_solution(M: ModelManifold, R0: float, lam: float, alpha: float, inner_value: float = 1.0,
                    r_end: Optional[float] = None, grid: Optional[np.ndarray] = None,
                    overflow: float = 1e250, rtol: float = 1e-10, atol: float = 1e-13) -> RadialProfile:
    """Initial value problem v(R0) = inner_value, v'(R0) = alpha for v'' + (m-1)(g'/g) v' = lam v.

    Integrated as a first-order system with a stiff implicit stepper; when
    |v| passes ``overflow`` the profile is cut there and flagged.
    """
    if lam <= 0:
        raise ExteriorError("rate must be positive")
    if grid is None:
        r_end = r_end or R0 + 10.0
        grid = np.linspace(R0, r_end, 1001)
    grid = np.asarray(grid, dtype=float)
    r_end = float(grid[-1])
    k = M.dim - 1
    g = M.g

    def rhs(r, y):
        drift = k * g.logd(np.array([r]))[1][0]
        return [y[1], lam * y[0] - drift * y[1]]

    def jac(r, y):
        drift = k * g.logd(np.array([r]))[1][0]
        return [[0.0, 1.0], [lam, -drift]]

    def blowup(r, y):
        return overflow - max(abs(y[0]), abs(y[1]))

    blowup.terminal = True
    sol = solve_ivp(rhs, (R0, r_end), [inner_value, alpha], method="Radau", jac=jac, rtol=rtol, atol=atol,
                    events=blowup, dense_output=True)
    if sol.status == -1:
        raise ExteriorError(f"Cauchy integration failed: {sol.message}")
    reached = float(sol.t[-1])
    truncated = sol.status == 1
    keep = grid[grid <= reached]
    vals = sol.sol(keep)
    meta = {"R0": R0, "lambda": lam, "alpha": alpha, "inner_value": inner_value, "model": M.label,
            "truncated": truncated, "blowup_radius": reached if truncated else None}
    prof = RadialProfile(keep, vals[0], meta)
    object.__setattr__(prof, "derivative", vals[1])
    return prof


# ---------------------------------------------------------------------------
# structural checks used by the invariant tests and reports


def flux_nondecreasing(trace_or_disc, h: Optional[np.ndarray] = None, rel: float = 1e-9,
                       floor: float = _TINY) -> bool:
    """Discrete flux g^{m-1} h' nondecreasing across faces.

    Faces touching values below ``floor`` are skipped: subnormal numbers
    carry too few digits for the differences to mean anything.
    """
    if isinstance(trace_or_disc, ExhaustionTrace):
        disc = trace_or_disc.discretization
        h = trace_or_disc.final.values
    else:
        disc = trace_or_disc
    h = np.asarray(h)
    sign, logmag = disc.flux(h)
    live = np.minimum(np.abs(h[:-1]), np.abs(h[1:])) > floor
    for i in range(sign.size - 1):
        if not (live[i] and live[i + 1]):
            continue
        s0, s1 = sign[i], sign[i + 1]
        if s0 < 0 and s1 < 0:
            if logmag[i + 1] > logmag[i] + rel:
                return False
        elif s0 < 0 or s1 < 0:
            if s1 < 0:
                return False
        elif s0 > 0 and s1 > 0 and logmag[i + 1] < logmag[i] - rel:
            return False
        elif s0 > 0 and s1 == 0:
            return False
    return True


def strictly_decreasing(profile: RadialProfile, floor: float = _TINY) -> bool:
    """h_{i+1} < h_i wherever h_i is above the underflow floor (outer node excluded)."""
    v = profile.values[:-1]
    live = v[:-1] > floor
    return bool(np.all(np.diff(v)[live] < 0))


def slope_dichotomy(profile: RadialProfile) -> bool:
    """Once a forward difference is >= 0 past the first node, all later ones are too."""
    d = np.diff(profile.values)[1:]
    nonneg = d >= 0
    if not nonneg.any():
        return True
    first = int(np.argmax(nonneg))
    return bool(np.all(nonneg[first:]))


def discrete_residual(M: ModelManifold, u: RadialProfile, q: Potential) -> np.ndarray:
    """Row-scaled discrete (g^{m-1} u')' - q g^{m-1} u at interior nodes of ``u``'s grid."""
    disc = Discretization(M, u.grid, q)
    a, b, c = disc.rows(u.grid.size - 1)
    v = u.values
    return a * v[:-2] + b * v[1:-1] + c * v[2:]


def is_supersolution(M: ModelManifold, u: RadialProfile, q: Potential, tol: float = 1e-12) -> bool:
    """Discrete Delta u <= q u in the interior and u(R0) >= 1."""
    return bool(u.values[0] >= 1.0 and np.all(discrete_residual(M, u, q) <= tol))


def below(lower: RadialProfile, upper: RadialProfile, slack: float = 1e-10) -> bool:
    """lower <= upper on the overlap of the two grids (upper interpolated)."""
    lo, hi = max(lower.grid[0], upper.grid[0]), min(lower.grid[-1], upper.grid[-1])
    keep = (lower.grid >= lo) & (lower.grid <= hi)
    return bool(np.all(lower.values[keep] <= upper(lower.grid[keep]) + slack))


def bounded_solution_gaps(M: ModelManifold, R0: float = 1.0, q: Potential = 1.0, outer_value: float = 1.0,
                          doublings=(6, 8, 10, 12), window: Optional[float] = None,
                          opts: ExteriorOptions = DEFAULT_OPTIONS) -> list:
    """sup over [R0, window] of |v_n - h_n| where v_n solves the annulus problem with
    h(R0) = 1 and the bounded outer value.  On stochastically complete models
    the gaps go to 0; otherwise they settle at the gap to the maximal bounded solution."""
    window = window or R0 + 10.0
    top = R0 * 2.0 ** max(doublings)
    grid = build_grid(R0, min(top, M.g.domain_end), opts.h0, opts.ratio, (opts.report_radius or R0 + 10.0) + 6.0)
    disc = Discretization(M, grid, q)
    cut = disc.index_at(window)
    out = []
    for n in doublings:
        idx = disc.index_at(R0 * 2.0 ** n)
        h = disc.solve(idx, 1.0, 0.0)
        v = disc.solve(idx, 1.0, outer_value)
        out.append((float(grid[idx]), float(np.max(np.abs(v[: cut + 1] - h[: cut + 1])))))
    return out


def write_trace(trace: ExhaustionTrace, directory: Union[str, Path], stem: str = "exterior") -> list:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    csv_path = d / f"{stem}_profile.csv"
    json_path = d / f"{stem}_trace.json"
    trace.to_csv(csv_path)
    json_path.write_text(trace.to_json(), encoding="utf-8")
    return [str(csv_path), str(json_path)]
