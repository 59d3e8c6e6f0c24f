"""Radial heat semigroup on model manifolds by Dirichlet exhaustion.

u_t = u'' + (m-1)(g'/g) u' is advanced with backward Euler on a grid that
starts at the pole.  The pole cell is a ball (no flux through r = 0), the
outer wall carries u = 0, and the space discretization is the exponentially
fitted finite-volume scheme of :mod:`fellerlab.exterior`.  The step matrix
is an M-matrix, so positivity, the maximum principle, monotonicity in the
domain and decay of total mass hold for the discrete flow exactly.

Accuracy is guarded twice: the time step is halved until a step-doubling
(Richardson) estimate is below tolerance, and the wall is doubled until the
reported values stop moving.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .exterior import _frac_q, _log_fit
from .integrals import log_integrate_cells
from .profiles import RadialProfile
from .tridiag import implicit_steps
from .verdict import Verdict, fails, holds, inconclusive, to_jsonable
from .warping import ModelManifold

DEFAULT_PROBE_TIMES = (0.1, 1.0, 10.0)
_TINY = 1e-280


class HeatError(ValueError):
    pass


@dataclass(frozen=True)
class HeatOptions:
    dr: float = 0.005
    uniform_until: float = 4.0
    ratio: float = 1.01
    dt: Optional[float] = None  # default min(1e-3, t/200)
    rtol_time: float = 1e-5
    refine: bool = True
    max_halvings: int = 10
    wall: Optional[float] = None
    wall_tol: float = 1e-8
    max_wall_doublings: int = 6
    report_radius: Optional[float] = None
    decay_threshold: float = 1e-6
    plateau_threshold: float = 1e-3
    flat_tolerance: float = 0.01


DEFAULT_OPTIONS = HeatOptions()


@dataclass(frozen=True)
class Indicator:
    """Indicator function of the ball B_R around the pole."""
    radius: float


@dataclass(frozen=True)
class Constant:
    """Constant initial datum, truncated at the Dirichlet wall."""
    value: float = 1.0


Initial = Union[Indicator, Constant, RadialProfile, Callable[[np.ndarray], np.ndarray], float]


def heat_grid(top: float, dr: float, uniform_until: float, ratio: float, extra=()) -> np.ndarray:
    """Nodes 0, dr, 2dr, ... up to ``uniform_until``, then spacing growing by ``ratio``."""
    n_u = int(round(uniform_until / dr))
    uniform = dr * np.arange(n_u + 1)
    r = uniform[-1]
    if top > r:
        n = int(math.ceil(math.log1p((top - r) * (ratio - 1.0) / dr) / math.log(ratio))) + 2
        tail = r + np.cumsum(dr * ratio ** np.arange(1, n + 1))
        grid = np.concatenate([uniform, tail])
    else:
        grid = uniform
    for x in extra:
        if x <= 0:
            continue
        j = int(np.argmin(np.abs(grid - x)))
        grid[j] = x
    return grid


class HeatOperator:
    """Row-scaled backward-Euler pieces for nodes 0..N-1 with u(r_N) = 0."""

    def __init__(self, M: ModelManifold, grid: np.ndarray):
        self.M = M
        self.grid = grid
        k = M.dim - 1
        N = grid.size - 1
        if N < 2:
            raise HeatError("heat grid needs at least three nodes")
        phi = np.full(grid.size, -np.inf)
        phi[1:] = k * M.g.log(grid[1:])
        if not np.all(np.isfinite(phi[1:])):
            raise HeatError("g is not representable on the heat grid")
        d = np.diff(grid)
        z = np.diff(phi[1:])
        log_fit = _log_fit(z)
        qf = _frac_q(z)
        log_K = np.empty(N)
        mid = 0.5 * grid[1]
        log_K[0] = k * float(M.g.log(np.array([mid]))[0]) - math.log(d[0])
        log_K[1:] = phi[1:-1] - np.log(d[1:]) + log_fit
        # measures: exact split of [0, r_1] at its midpoint, exponential weights elsewhere
        dens = lambda r: k * M.g.log(r)
        pole_parts = log_integrate_cells(dens, np.array([0.0, mid, grid[1]]), lambda r: k * M.g.logd(r)[1])
        right = d[1:] * (1.0 - qf)   # node i (i >= 1) from interval [r_i, r_{i+1}]
        left = d[1:] * qf            # node i+1 from interval [r_i, r_{i+1}]
        log_V = np.empty(N)
        log_V[0] = pole_parts[0]
        with np.errstate(divide="ignore"):
            inner = np.zeros(N - 1)
            inner[:] = right[: N - 1]
            inner[1:] += left[: N - 2]
            log_V[1:] = phi[1:N] + np.log(inner)
        log_V[1] = np.logaddexp(log_V[1], pole_parts[1])
        self.phi = phi
        self.log_K = log_K
        self.log_V = log_V
        self.left_share = np.concatenate([[-np.inf], [pole_parts[1]], phi[2:N] + np.log(left[: N - 2])])
        self.N = N

    def step_matrix(self, dt: float):
        N = self.N
        ldt = math.log(dt)
        la = np.full(N, -np.inf)
        la[1:] = ldt + self.log_K[: N - 1] - self.log_V[1:]
        lg = ldt + self.log_K - self.log_V
        S = np.maximum(0.0, np.maximum(la, lg))
        lower = -np.exp(la - S)
        upper = -np.exp(lg - S)
        scale = np.exp(-S)
        diag = scale - lower - upper
        upper[-1] = 0.0
        lower[0] = 0.0
        return lower, diag, upper, scale

    def initial_values(self, initial: Initial) -> np.ndarray:
        r = self.grid[: self.N]
        if isinstance(initial, Indicator):
            R = initial.radius
            j = int(np.argmin(np.abs(self.grid - R)))
            if abs(self.grid[j] - R) > 1e-12 * max(1.0, R):
                raise HeatError("indicator radius must be a grid node")
            u = (r < R).astype(float)
            if j < self.N:
                u[j] = math.exp(self.left_share[j] - self.log_V[j]) if j > 0 else 0.0
            return u
        if isinstance(initial, Constant):
            return np.full(self.N, float(initial.value))
        if isinstance(initial, RadialProfile):
            u = np.interp(r, initial.grid, initial.values, left=initial.values[0], right=0.0)
            return u
        if callable(initial):
            return np.asarray(initial(r), dtype=float) * np.ones_like(r)
        return np.full(self.N, float(initial))

    def log_mass(self, u: np.ndarray) -> float:
        """log of c_m * sum V_i u_i (nonnegative u)."""
        with np.errstate(divide="ignore"):
            terms = self.log_V + np.log(np.maximum(u, 0.0))
        return float(np.logaddexp.reduce(terms)) + math.log(self.M.sphere_constant)


@dataclass
class HeatState:
    grid: np.ndarray
    values: np.ndarray
    time: float
    outer_radius: float
    mass: float
    log_mass: float = math.nan
    diagnostics: dict = field(default_factory=dict)

    @property
    def pole_value(self) -> float:
        return float(self.values[0])

    def __call__(self, r):
        return np.interp(r, self.grid, self.values)

    def profile(self) -> RadialProfile:
        return RadialProfile(self.grid, self.values, {"time": self.time, "outer_radius": self.outer_radius})

    def to_dict(self) -> dict:
        return to_jsonable({"time": self.time, "outer_radius": self.outer_radius, "mass": self.mass,
                            "log_mass": self.log_mass, "pole_value": self.pole_value,
                            "nodes": int(self.grid.size), "diagnostics": self.diagnostics})

    def to_csv(self, path: Union[str, Path, None] = None) -> str:
        lines = ["t,r,u"] + [f"{self.time!r},{float(r)!r},{float(u)!r}" for r, u in zip(self.grid, self.values)]
        text = "\n".join(lines) + "\n"
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text


def _run(op: HeatOperator, u0: np.ndarray, t: float, dt: float) -> tuple[np.ndarray, float]:
    steps = max(1, int(math.ceil(t / dt - 1e-9)))
    h = t / steps
    lower, diag, upper, scale = op.step_matrix(h)
    return implicit_steps(lower, diag, upper, scale, u0, steps), h


def _default_report(initial: Initial) -> float:
    if isinstance(initial, Indicator):
        return max(4.0 * initial.radius, 8.0)
    return 8.0


def evolve(M: ModelManifold, initial: Initial, t: float, opts: HeatOptions = DEFAULT_OPTIONS) -> HeatState:
    """Heat flow of ``initial`` for time t, wall and time step refined until stable."""
    if t < 0:
        raise HeatError("time must be nonnegative")
    report = opts.report_radius or _default_report(initial)
    W0 = opts.wall or 2.0 * report + 8.0 * math.sqrt(max(t, 1e-12))
    W_top = min(W0 * 2.0 ** opts.max_wall_doublings, M.g.domain_end)
    extra = [initial.radius] if isinstance(initial, Indicator) else []
    full = heat_grid(W_top, opts.dr, min(opts.uniform_until, W_top), opts.ratio, extra)
    win = full <= report

    def operator(W):
        j = int(np.searchsorted(full, W * (1 - 1e-12)))
        j = min(max(j, int(np.count_nonzero(win)) + 1), full.size - 1)
        return HeatOperator(M, full[: j + 1])

    diag: dict = {"walls": [], "wall_changes": []}
    prev = None
    dt = opts.dt or (min(1e-3, t / 200.0) if t > 0 else 1.0)
    state = None
    W = W0
    too_close = True
    rich = math.nan
    domain_violation = 0.0
    for attempt in range(opts.max_wall_doublings + 1):
        op = operator(W)
        u0 = op.initial_values(initial)
        if t == 0:
            u = u0
            used = 0.0
        elif attempt == 0:
            u, used = _run(op, u0, t, dt)
            halvings = 0
            while True:
                u_half, used_half = _run(op, u0, t, used / 2.0)
                nw = min(win.sum(), op.N)
                ref = max(float(np.max(np.abs(u_half[:nw]))), _TINY)
                rich = float(np.max(np.abs(u_half[:nw] - u[:nw]))) / ref
                if rich <= opts.rtol_time or not opts.refine or halvings >= opts.max_halvings:
                    if opts.refine:
                        u, used = u_half, used_half
                    break
                u, used = u_half, used_half
                halvings += 1
            dt = used
        else:
            u, used = _run(op, u0, t, dt)
        values = np.concatenate([u, [0.0]])
        lm = op.log_mass(u)
        state = HeatState(op.grid.copy(), values, t, float(op.grid[-1]),
                          float(np.exp(lm)) if lm < 709 else math.inf, lm)
        diag["walls"].append(float(op.grid[-1]))
        if prev is not None:
            n = prev.size
            nw = int(np.count_nonzero(win))
            change = float(np.max(np.abs(values[:nw] - prev[:nw])))
            diag["wall_changes"].append(change)
            domain_violation = max(domain_violation, float(np.max(prev[: n - 1] - values[: n - 1])))
            if change < opts.wall_tol:
                too_close = False
                break
        prev = values
        if t == 0:
            too_close = False
            break
        if op.grid[-1] >= W_top * (1 - 1e-12):
            break
        W *= 2.0
    diag.update({"dt": dt, "richardson_error": rich, "wall_too_close": too_close,
                 "domain_monotone_violation": domain_violation, "report_radius": report})
    state.diagnostics = diag
    return state


def _verdict_from_far(values: np.ndarray, radii: np.ndarray, opts: HeatOptions, route: str, **ev) -> Verdict:
    far, prev = float(values[-1]), float(values[-2])
    ev.update({"samples": list(zip(radii.tolist(), values.tolist()))})
    shrinking = far < prev * (1.0 - opts.flat_tolerance) or far < _TINY
    if far < opts.decay_threshold and shrinking:
        return holds(route, "mass near the pole leaves the far field", **ev)
    if far > opts.plateau_threshold and abs(far - prev) <= opts.flat_tolerance * prev:
        return fails(route, "far-field values plateau", **ev)
    return inconclusive(route, "far-field values neither decayed nor flat", **ev)


def default_probe_radii(R: float, t: float) -> np.ndarray:
    r_far = max(1024.0 * R, R + 24.0 * math.sqrt(t))
    return np.geomspace(r_far / 8.0, r_far, 4)


def probe_state(M: ModelManifold, R: float = 1.0, t: float = 1.0, r_samples: Optional[Sequence[float]] = None,
                opts: HeatOptions = DEFAULT_OPTIONS) -> tuple[Verdict, HeatState]:
    """Feller probe verdict together with the evolved state it was read from."""
    if R <= 0 or t <= 0:
        raise HeatError("R and t must be positive")
    radii = np.asarray(r_samples if r_samples is not None else default_probe_radii(R, t), dtype=float)
    if radii.size < 2 or np.any(np.diff(radii) <= 0):
        raise HeatError("need at least two increasing sample radii")
    radii = radii[radii < M.g.domain_end]
    o = HeatOptions(**{**opts.__dict__, "report_radius": float(radii[-1])})
    state = evolve(M, Indicator(R), t, o)
    vals = np.asarray(state(radii))
    ev = {"t": t, "R": R, "wall": state.outer_radius, "dt": state.diagnostics["dt"],
          "richardson_error": state.diagnostics["richardson_error"]}
    if state.diagnostics["wall_too_close"]:
        return inconclusive("heat", "wall doubling did not settle", wall_too_close=True, **ev), state
    return _verdict_from_far(vals, radii, opts, "heat", **ev), state


def feller_probe(M: ModelManifold, R: float = 1.0, t: float = 1.0, r_samples: Optional[Sequence[float]] = None,
                 opts: HeatOptions = DEFAULT_OPTIONS) -> Verdict:
    """Does (P_t 1_{B_R})(r) vanish as r grows?  Evidence is read at the sampled radii."""
    return probe_state(M, R, t, r_samples, opts)[0]


def feller_probe_suite(M: ModelManifold, R: float = 1.0, times: Sequence[float] = DEFAULT_PROBE_TIMES,
                       opts: HeatOptions = DEFAULT_OPTIONS) -> Verdict:
    """Probe at several times: Fails if any time fails, Holds if all hold."""
    vs = [feller_probe(M, R, t, None, opts) for t in times]
    ev = {"per_time": [{"t": t, **v.to_dict()} for t, v in zip(times, vs)]}
    if any(v.fails for v in vs):
        return fails("heat", "plateau at some probe time", **ev)
    if all(v.holds for v in vs):
        return holds("heat", "decay at every probe time", **ev)
    return inconclusive("heat", "not all probe times conclusive", **ev)


def mass_history(M: ModelManifold, t_grid: Sequence[float], opts: HeatOptions = DEFAULT_OPTIONS) -> list:
    """(t, (P_t 1)(o)) for the unit datum truncated at the wall.

    The wall is doubled until the last value settles; the chained flow uses
    one fixed time step so the history is a single discrete semigroup orbit.
    """
    ts = sorted(float(x) for x in t_grid)
    if any(x < 0 for x in ts):
        raise HeatError("times must be nonnegative")
    positive = [x for x in ts if x > 0]
    if not positive:
        return [(x, 1.0) for x in ts]
    gaps = np.diff([0.0] + positive)
    gaps = gaps[gaps > 0]
    dt = opts.dt or min(1e-3, float(gaps.min()) / 50.0)
    T = positive[-1]
    W = opts.wall or 16.0 + 8.0 * math.sqrt(T)
    prev = None
    out = None
    for _ in range(opts.max_wall_doublings + 1):
        Wc = min(W, M.g.domain_end)
        grid = heat_grid(Wc, opts.dr, min(opts.uniform_until, Wc), opts.ratio)
        op = HeatOperator(M, grid)
        u = op.initial_values(Constant(1.0))
        now = 0.0
        hist = []
        for x in ts:
            if x > now:
                u, _ = _run(op, u, x - now, dt)
                now = x
            hist.append((x, float(u[0])))
        out = hist
        if prev is not None and abs(prev[-1][1] - hist[-1][1]) < opts.wall_tol:
            break
        prev = hist
        if Wc >= M.g.domain_end:
            break
        W *= 2.0
    return out


def resolvent_integral(M: ModelManifold, initial: Initial, lam: float, T: float, dt: float = 1e-2,
                       opts: HeatOptions = DEFAULT_OPTIONS) -> RadialProfile:
    """int_0^T e^{-lam t} (P_t u)(r) dt by the right-endpoint rule along the discrete flow."""
    if lam <= 0 or T <= 0:
        raise HeatError("lam and T must be positive")
    report = opts.report_radius or _default_report(initial)
    W = opts.wall or 2.0 * report + 8.0 * math.sqrt(T)
    extra = [initial.radius] if isinstance(initial, Indicator) else []
    grid = heat_grid(min(W, M.g.domain_end), opts.dr, min(opts.uniform_until, W), opts.ratio, extra)
    op = HeatOperator(M, grid)
    u = op.initial_values(initial)
    steps = max(1, int(math.ceil(T / dt)))
    h = T / steps
    lower, diag, upper, scale = op.step_matrix(h)
    acc = np.zeros_like(u)
    for n in range(1, steps + 1):
        u = implicit_steps(lower, diag, upper, scale, u, 1)
        acc += h * math.exp(-lam * n * h) * u
    return RadialProfile(grid, np.concatenate([acc, [0.0]]), {"lambda": lam, "T": T})
