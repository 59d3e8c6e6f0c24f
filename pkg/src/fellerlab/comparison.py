"""Curvature comparison, Hsu's criterion and Khas'minskii-type tests.

Comparison models come from the Jacobi problem g'' + G g = 0, g(0) = 0,
g'(0) = 1.  It is integrated in Pruefer form (g = rho sin theta,
g' = rho cos theta), which is free of overflow and locates conjugate
points as theta = pi.  Where the solution is the recessive one of a
strongly negative G, forward integration loses it to round-off; there the
log-derivative y = g'/g is continued by the backward Riccati equation
y' = -G - y^2, which is stable in that direction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from .classifier import classify_feller, classify_stochastically_complete, classify_volume
from .exterior import Discretization, build_grid
from .formula import Expr, parse
from .integrals import (
    DEFAULT_OPTIONS as TAIL_OPTIONS,
    classify_tail,
    log_integrate_cells,
    tail_of_volume_ratio,
    volume_grid,
)
from .profiles import RadialProfile
from .verdict import Verdict, fails, holds, inconclusive
from .warping import CallablePiece, ModelManifold, TablePiece, WarpingFunction, _as_piece, make_model

SECTIONAL_UPPER = "SectionalUpper"
RICCI_LOWER = "RicciLower"
_AMPLIFICATION_LIMIT = 8.0


class ComparisonError(ValueError):
    pass


class ConjugatePoint(ComparisonError):
    def __init__(self, radius: float):
        super().__init__(f"Jacobi solution vanishes at r = {radius:.12g}")
        self.radius = radius


class HypothesisFailure(ComparisonError):
    def __init__(self, clause: str, detail: str = ""):
        super().__init__(f"hypothesis violated: {clause}" + (f" ({detail})" if detail else ""))
        self.clause = clause


class PreconditionError(ComparisonError):
    pass


class RangeViolation(ComparisonError):
    pass


class NotSubsolution(ComparisonError):
    pass


RadialFn = Union[str, float, Expr, Callable[[np.ndarray], np.ndarray], "CurvatureBound"]


@dataclass(frozen=True, eq=False)
class CurvatureBound:
    G: Callable[[np.ndarray], np.ndarray]
    kind: str = SECTIONAL_UPPER
    dim: int = 2
    label: str = "G"
    dG: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if self.kind not in (SECTIONAL_UPPER, RICCI_LOWER):
            raise ValueError(f"unknown bound kind {self.kind!r}")

    def __call__(self, r):
        return np.asarray(self.G(np.asarray(r, dtype=float)), dtype=float) * np.ones(np.shape(r))

    def derivative(self, r):
        r = np.asarray(r, dtype=float)
        if self.dG is not None:
            return np.asarray(self.dG(r), dtype=float) * np.ones(np.shape(r))
        h = 1e-5 * np.maximum(1.0, np.abs(r))
        return (self(r + h) - self(r - h)) / (2.0 * h)

    @classmethod
    def parse(cls, text: str, kind: str = SECTIONAL_UPPER, dim: int = 2) -> "CurvatureBound":
        return as_bound(text, kind, dim)


def as_bound(G: RadialFn, kind: str = SECTIONAL_UPPER, dim: int = 2) -> CurvatureBound:
    if isinstance(G, CurvatureBound):
        return G
    if isinstance(G, str):
        expr = parse(G, "r")
        return CurvatureBound(expr.evaluate, kind, dim, G, expr.derivative)
    if isinstance(G, Expr):
        return CurvatureBound(G.evaluate, kind, dim, str(G), G.derivative)
    if callable(G):
        return CurvatureBound(G, kind, dim, getattr(G, "__name__", "G"))
    c = float(G)
    return CurvatureBound(lambda r: np.full(np.shape(r), c), kind, dim, f"{c:g}", lambda r: np.zeros(np.shape(r)))


def curvature_of(g: WarpingFunction, kind: str = RICCI_LOWER, dim: int = 2) -> CurvatureBound:
    """The radial curvature -g''/g of a warping function, as a bound.

    Near the pole the log form cancels two O(1/r^2) terms, so the value is
    held constant below r = 1e-3 (the curvature of a smooth pole is even in r).
    """
    floor = 1e-3
    return CurvatureBound(lambda r: g.curvature(np.maximum(r, floor)), kind, dim, f"-g''/g of {g.label}")


# ---------------------------------------------------------------------------
# Jacobi equation


@dataclass
class JacobiSolution:
    r: np.ndarray
    log_g: np.ndarray
    dlog_g: np.ndarray
    recessive_continuation: bool = False
    switch_radius: Optional[float] = None
    match_error: float = 0.0
    diagnostics: dict = field(default_factory=dict)


def jacobi_nodes(r_max: float, h0: float = 0.005, r_uniform: float = 2.5, ratio: float = 1.002) -> np.ndarray:
    n_u = int(round(min(r_uniform, r_max) / h0))
    uni = np.linspace(0.0, n_u * h0, n_u + 1)
    if r_max <= uni[-1]:
        return uni
    n = int(math.ceil(math.log(r_max / uni[-1]) / math.log(ratio)))
    geo = uni[-1] * ratio ** np.arange(1, n + 1)
    geo = geo[geo < r_max * (1 - 1e-12)]
    return np.concatenate([uni, geo, [r_max]])


def solve_jacobi(G: RadialFn, r_max: float = 256.0, nodes: Optional[np.ndarray] = None,
                 tail_dlog: Optional[Callable[[float], float]] = None, rtol: float = 1e-12,
                 match_tol: float = 1e-6) -> JacobiSolution:
    """log g and g'/g of the Jacobi solution on ``nodes`` (default graded to r_max)."""
    B = as_bound(G)
    Gs = lambda r: float(B(np.array([r]))[0])
    if nodes is None:
        nodes = jacobi_nodes(r_max)
    r_max = float(nodes[-1])

    def pruefer(r, y):
        th = y[0]
        s, c = math.sin(th), math.cos(th)
        Gr = Gs(r)
        cot = c / s if s > 0 else math.inf
        amp = 2.0 * math.sqrt(-Gr) if (Gr < 0 and cot < 0) else 0.0
        return [c * c + Gr * s * s, (1.0 - Gr) * s * c, amp]

    def hit_pi(r, y):
        return y[0] - math.pi

    hit_pi.terminal = True
    hit_pi.direction = 1

    def too_amplified(r, y):
        return y[2] - _AMPLIFICATION_LIMIT

    too_amplified.terminal = True
    too_amplified.direction = 1

    fwd = solve_ivp(pruefer, (0.0, r_max), [0.0, 0.0, 0.0], method="DOP853", rtol=rtol, atol=1e-14,
                    dense_output=True, events=[hit_pi, too_amplified])
    if fwd.status == -1:
        raise ComparisonError(f"Jacobi integration failed: {fwd.message}")
    if fwd.t_events[0].size:
        r0 = float(fwd.t_events[0][0])
        lo = max(r0 - 1e-3, 1e-12)
        f = lambda r: fwd.sol(r)[0] - math.pi
        if f(lo) < 0 < f(min(r0 + 1e-3, fwd.t[-1])):
            r0 = brentq(f, lo, min(r0 + 1e-3, fwd.t[-1]), xtol=1e-13, rtol=1e-15)
        raise ConjugatePoint(r0)
    reached = float(fwd.t[-1])
    log_g = np.empty(nodes.size)
    dlog = np.empty(nodes.size)
    inside = nodes <= reached
    ys = fwd.sol(nodes[inside])
    th = ys[0]
    with np.errstate(divide="ignore"):
        log_g[inside] = ys[1] + np.log(np.sin(th))
        dlog[inside] = np.cos(th) / np.sin(th)
    out = JacobiSolution(nodes, log_g, dlog, diagnostics={"forward_end": reached})
    if reached >= r_max * (1 - 1e-12):
        return out

    # recessive continuation by the backward Riccati equation
    r_c = reached
    y_c = math.cos(fwd.y[0, -1]) / math.sin(fwd.y[0, -1])
    l_c = fwd.y[1, -1] + math.log(math.sin(fwd.y[0, -1]))
    G_end = Gs(r_max)
    if tail_dlog is not None:
        y_end = float(tail_dlog(r_max))
    elif G_end < 0:
        y_end = -math.sqrt(-G_end)
    else:
        raise ComparisonError("cannot continue a recessive solution where G >= 0")

    def riccati(r, y):
        return [-Gs(r) - y[0] * y[0], y[0]]

    def riccati_jac(r, y):
        return [[-2.0 * y[0], 0.0], [1.0, 0.0]]

    bwd = solve_ivp(riccati, (r_max, r_c), [y_end, 0.0], method="Radau", jac=riccati_jac, rtol=1e-11,
                    atol=1e-12, dense_output=True)
    if bwd.status != 0:
        raise ComparisonError(f"backward Riccati integration failed: {bwd.message}")
    y_b, L_b = bwd.sol(r_c)
    err = abs(y_b - y_c) / max(1.0, abs(y_c))
    out.match_error = float(err)
    out.switch_radius = r_c
    if err > match_tol:
        raise ComparisonError(
            f"recessive continuation does not match the forward solution at r = {r_c:.6g} (rel. error {err:.3g})")
    far = ~inside
    yb, Lb = bwd.sol(nodes[far])
    log_g[far] = l_c + (Lb - L_b)
    dlog[far] = yb
    out.recessive_continuation = True
    out.diagnostics.update({"switch_radius": r_c, "match_error": float(err)})
    return out


def jacobi_model(G: RadialFn, m: int, r_max: float = 256.0, tail: Optional[str] = None,
                 blend: Optional[tuple] = None, name: str = "") -> ModelManifold:
    """Model manifold whose warping function solves g'' + G g = 0, g(0) = 0, g'(0) = 1."""
    B = as_bound(G, dim=m)
    tail_piece = _as_piece(tail) if tail is not None else None
    tail_dlog = (lambda r: float(tail_piece.logd(np.array([r]))[1][0])) if tail_piece is not None else None
    sol = solve_jacobi(B, r_max, tail_dlog=tail_dlog)
    d2 = -B(sol.r) - sol.dlog_g ** 2
    table = TablePiece(sol.r, sol.log_g, sol.dlog_g, d2)
    label = f"jacobi[{B.label}]"
    if tail_piece is None:
        g = WarpingFunction(table, None, None, label)
    else:
        window = blend or (0.75 * r_max, r_max)
        g = WarpingFunction(table, tail_piece, tuple(window), label + f" -> {tail}")
    M = make_model(m, g, name=name or label, check_radius=min(64.0, r_max))
    object.__setattr__(M, "jacobi", sol)
    return M


def jacobi_residual(M: ModelManifold, G: RadialFn, r: Optional[np.ndarray] = None) -> np.ndarray:
    """|g'' + G g| / max(1, g) from the tabulated interpolant, at interior table nodes by default."""
    B = as_bound(G)
    if r is None:
        nodes = M.g.body.r
        r = nodes[1:-1]
    l, l1, l2 = M.g.logd(r)
    gabs = np.exp(np.minimum(l, 700.0))
    return np.abs(l2 + l1 * l1 + B(r)) * np.minimum(gabs, 1.0)


def feller_by_sec_comparison(G: RadialFn, m: int, r_max: float = 256.0) -> Verdict:
    """Upper sectional bound: a Feller comparison model makes every such manifold with a pole Feller."""
    B = as_bound(G, SECTIONAL_UPPER, m)
    M = jacobi_model(B, m, r_max)
    v = classify_feller(M)
    ev = {"model_feller": v, "bound": B.label, "conditional_on": "M has a pole at the reference point"}
    if v.holds:
        return holds("comparison", "comparison model is Feller", **ev)
    return inconclusive("comparison", "comparison model is not known to be Feller; nothing transfers", **ev)


def non_feller_by_ric_comparison(G: RadialFn, m: int, r_max: float = 256.0) -> Verdict:
    """Lower Ricci bound: a finite-volume, non-Feller comparison model makes every such manifold non-Feller."""
    B = as_bound(G, RICCI_LOWER, m)
    M = jacobi_model(B, m, r_max)
    vol, value = classify_volume(M)
    v = classify_feller(M)
    ev = {"model_volume": vol, "model_volume_value": value, "model_feller": v, "bound": B.label}
    if vol.holds and v.fails:
        return fails("comparison", "comparison model has finite volume and is not Feller", **ev)
    return inconclusive("comparison", "comparison model does not meet both conditions", **ev)


# ---------------------------------------------------------------------------
# Hsu


def _hsu_samples(r_hi: float = 4096.0) -> np.ndarray:
    return np.concatenate([np.linspace(0.0, 1.0, 65)[:-1], np.geomspace(1.0, r_hi, 2048)])


def check_positive_nondecreasing(B: CurvatureBound, r_hi: float = 4096.0) -> tuple[bool, bool]:
    r = _hsu_samples(r_hi)
    vals = B(r)
    positive = bool(np.all(vals > 0))
    with np.errstate(invalid="ignore"):
        d = np.diff(vals)
        # +inf after overflow still counts as growth
        ok = (d >= -1e-12 * np.abs(vals[1:])) | (np.isinf(vals[1:]) & (vals[1:] > 0))
    nondecreasing = bool(np.all(ok))
    return positive, nondecreasing


def hsu_criterion(G: RadialFn, r_hi: float = 4096.0) -> Verdict:
    """Feller when Ric >= -(m-1) G^2 with G positive, increasing and 1/G not integrable."""
    B = as_bound(G, RICCI_LOWER)
    positive, monotone = check_positive_nondecreasing(B, r_hi)
    if not (positive and monotone):
        return inconclusive("hsu", "G is not positive and nondecreasing on the sampled range",
                            positive=positive, nondecreasing=monotone)
    with np.errstate(divide="ignore"):
        c = classify_tail(lambda r: -np.log(B(r)), 1.0)
    if c.divergent:
        return holds("hsu", "1/G not integrable", inverse_G=c)
    if c.convergent:
        return inconclusive("hsu", "1/G integrable: criterion silent", inverse_G=c)
    return inconclusive("hsu", c.reason, inverse_G=c)


def estimate_alpha(B: CurvatureBound, k_lo: int = 4, k_hi: int = 12, last: int = 3) -> dict:
    """Running maximum of G'/G^2 over dyadic windows [2^k, 2^{k+1}]; the estimate is the max of the last few.

    Samples where G or G' overflow are dropped; windows with no usable sample
    are skipped, and ``alpha`` is nan when none remain.
    """
    per = []
    for k in range(k_lo, k_hi):
        r = np.linspace(2.0 ** k, 2.0 ** (k + 1), 257)
        with np.errstate(over="ignore", invalid="ignore"):
            q = B.derivative(r) / B(r) ** 2
        q = q[np.isfinite(q)]
        per.append(float(q.max()) if q.size else math.nan)
    usable = [a for a in per if not math.isnan(a)]
    return {"alpha": max(usable[-last:]) if usable else math.nan,
            "windows": [[2.0 ** k, 2.0 ** (k + 1), a] for k, a in zip(range(k_lo, k_hi), per)],
            "heuristic": True}


class _PrimitiveTable:
    """int_0^r G with Hermite interpolation using G itself as the slope."""

    def __init__(self, B: CurvatureBound, r_max: float):
        nodes = np.concatenate([np.linspace(0.0, 10.0, 1001)[:-1], np.geomspace(10.0, r_max, 8000)])
        x, w = np.polynomial.legendre.leggauss(8)
        a, b = nodes[:-1], nodes[1:]
        hw = (b - a) / 2.0
        pts = a[:, None] + hw[:, None] * (1.0 + x[None, :])
        cells = (B(pts.ravel()).reshape(pts.shape) * w[None, :]).sum(axis=1) * hw
        self.nodes = nodes
        self.I = np.concatenate([[0.0], np.cumsum(cells)])
        self.spline = CubicHermiteSpline(nodes, self.I, B(nodes))
        self.r_max = r_max


def hsu_sharpness_model(G: RadialFn, beta: float, m: int, blend_window=(2.0, 10.0), r_max: float = 65536.0,
                        alpha: Optional[float] = None) -> tuple[ModelManifold, dict]:
    """Spliced model with g = exp(-beta int_0^r G) beyond the blend window, plus hypothesis diagnostics."""
    B = as_bound(G, RICCI_LOWER, m)
    positive, monotone = check_positive_nondecreasing(B)
    if not positive:
        raise HypothesisFailure("G positive")
    if not monotone:
        raise HypothesisFailure("G increasing")
    with np.errstate(divide="ignore"):
        inv = classify_tail(lambda r: -np.log(B(r)), 1.0)
    if not inv.convergent:
        raise HypothesisFailure("1/G integrable at infinity", inv.reason)
    if alpha is None:
        est = estimate_alpha(B)
    else:
        est = {"alpha": float(alpha), "windows": [], "heuristic": False}
    a_hat = est["alpha"]
    if not math.isfinite(a_hat):
        raise HypothesisFailure("limsup G'/G^2 finite")
    if beta <= a_hat:
        raise HypothesisFailure("beta > limsup G'/G^2", f"beta = {beta:g}, alpha = {a_hat:g}")

    prim = _PrimitiveTable(B, r_max)

    def tail_fn(r):
        r = np.asarray(r, dtype=float)
        return -beta * prim.spline(r), -beta * B(r), -beta * B.derivative(r)

    tail = CallablePiece(tail_fn, (0.0, r_max), f"exp(-{beta:g} int G)")
    g = WarpingFunction(_as_piece("r"), tail, tuple(blend_window), f"r -> exp(-{beta:g} int_0^r [{B.label}])")
    M = make_model(m, g, name=f"hsu sharpness m={m}, beta={beta:g}, G={B.label}")

    # curvature estimate on the windows used for alpha
    lo = 2.0 ** 9 if alpha is None else 2.0 * blend_window[1]
    r = np.geomspace(max(lo, blend_window[1] * 2), min(4096.0, r_max), 512)
    K = g.curvature(r)
    bound = -beta * (beta - a_hat) * B(r) ** 2
    curvature_ok = bool(np.all(K <= bound + 1e-9 * np.abs(bound)))
    vol = volume_grid(M).volume
    ratio = tail_of_volume_ratio(M, "feller")
    diagnostics = {
        "alpha": est,
        "beta": beta,
        "G_positive": positive,
        "G_nondecreasing": monotone,
        "inverse_G_integrable": inv,
        "curvature_estimate_ok": curvature_ok,
        "curvature_checked_on": [float(r[0]), float(r[-1])],
        "area_density_integrable": vol.convergent,
        "area_density": vol,
        "outer_volume_ratio_integrable": ratio.convergent,
        "outer_volume_ratio": ratio,
    }
    return M, diagnostics


# ---------------------------------------------------------------------------
# Khas'minskii-type subsolution test


@dataclass(frozen=True)
class Nonlinearity:
    f: Callable[[np.ndarray], np.ndarray]
    lam: float
    df: Optional[Callable[[np.ndarray], np.ndarray]] = None
    bounds: Optional[tuple] = None
    label: str = "f"

    @classmethod
    def parse(cls, text: str, lam: float, bounds=None) -> "Nonlinearity":
        e = parse(text, "u")
        return cls(e.evaluate, float(lam), e.derivative, bounds, text)

    def derivative(self, u):
        if self.df is not None:
            return np.asarray(self.df(u), dtype=float) * np.ones(np.shape(u))
        h = 1e-6 * np.maximum(1.0, np.abs(u))
        return (self.f(u + h) - self.f(u - h)) / (2.0 * h)


def discrete_laplacian(M: ModelManifold, v: RadialProfile) -> np.ndarray:
    """Finite-volume Laplacian of a radial profile at its interior nodes."""
    disc = Discretization(M, v.grid, 0.0)
    vals = v.values
    lv = disc.log_V[1:-1]
    kr = np.exp(disc.log_K[1:] - lv)
    kl = np.exp(disc.log_K[:-1] - lv)
    return kr * (vals[2:] - vals[1:-1]) - kl * (vals[1:-1] - vals[:-2])


def alpha_function(M: ModelManifold, grid: Optional[np.ndarray] = None) -> RadialProfile:
    """u(r) = int_r^inf (int_s^inf g^{m-1}) / g^{m-1}(s) ds, which satisfies Delta u = 1.

    Requires g^{m-1} integrable and the outer volume ratio integrable.
    """
    if grid is None:
        grid = build_grid(1.0, 64.0, 0.01, 1.01, 12.0)
    grid = np.asarray(grid, dtype=float)
    k = M.dim - 1
    dens = lambda r: k * M.g.log(r)
    ddens = lambda r: k * M.g.logd(r)[1]
    phi = dens(grid)
    cells = log_integrate_cells(dens, grid, ddens)
    vol, _ = classify_volume(M)
    rest = classify_tail(dens, float(grid[-1]), TAIL_OPTIONS, M.g.domain_end, ddens)
    if not vol.holds or not math.isfinite(rest.log_partial):
        raise PreconditionError("g^{m-1} is not integrable; the alpha-function does not exist")
    logW = np.logaddexp(np.concatenate([np.logaddexp.accumulate(cells[::-1])[::-1], [-np.inf]]), rest.log_partial)
    R = np.exp(logW - phi)
    dR = -1.0 - ddens(grid) * R
    h = np.diff(grid)
    pieces = 0.5 * h * (R[:-1] + R[1:]) + h * h / 12.0 * (dR[:-1] - dR[1:])
    p = math.log(R[-2] / R[-1]) / math.log(grid[-1] / grid[-2])
    if p <= 1.0:
        raise PreconditionError("outer volume ratio is not integrable; the alpha-function does not exist")
    tail = R[-1] * grid[-1] / (p - 1.0)
    u = np.concatenate([np.cumsum(pieces[::-1])[::-1], [0.0]]) + tail
    return RadialProfile(grid, u, {"kind": "alpha-function", "model": M.label, "tail_exponent": p})


def khasminskii_subsolution_test(M: ModelManifold, u: RadialProfile, f_spec: Union[Nonlinearity, tuple, float],
                                 tol: float = 1e-3) -> Verdict:
    """Bounded u with Delta u >= f(u), f > 0, f' <= lam on a stochastically complete model: not Feller.

    Both inequalities are checked with the finite-volume Laplacian; ``tol``
    is a relative allowance for its truncation error against a profile
    computed by quadrature.
    """
    if isinstance(f_spec, Nonlinearity):
        nl = f_spec
    elif isinstance(f_spec, tuple):
        text, lam = f_spec[0], f_spec[1]
        nl = Nonlinearity.parse(text, lam, f_spec[2] if len(f_spec) > 2 else None) if isinstance(text, str) \
            else Nonlinearity(text, float(lam))
    else:
        c = float(f_spec)
        nl = Nonlinearity(lambda x: np.full(np.shape(x), c), 1.0, lambda x: np.zeros(np.shape(x)), None, f"{c:g}")
    if nl.lam <= 0:
        raise ValueError("lam must be positive")
    sc = classify_stochastically_complete(M)
    if not sc.holds:
        raise PreconditionError(f"model must be stochastically complete (verdict: {sc.status.value})")
    vals = u.values
    lo, hi = float(vals.min()), float(vals.max())
    if nl.bounds is not None:
        b_lo, b_hi = nl.bounds
        if lo < b_lo or hi > b_hi:
            raise RangeViolation(f"u ranges over [{lo:g}, {hi:g}], outside [{b_lo:g}, {b_hi:g}]")
        lo, hi = float(b_lo), float(b_hi)
    ts = np.linspace(lo, hi, 513) if hi > lo else np.array([lo])
    fv = np.asarray(nl.f(ts), dtype=float) * np.ones_like(ts)
    if np.any(fv <= 0):
        raise HypothesisFailure("f positive on the range of u")
    if np.any(nl.derivative(ts) > nl.lam + 1e-12):
        raise HypothesisFailure("f' <= lam on the range of u")
    lap_u = discrete_laplacian(M, u)
    fu = np.asarray(nl.f(vals[1:-1]), dtype=float) * np.ones(vals.size - 2)
    gap_u = lap_u - fu
    if np.any(gap_u < -tol * np.maximum(1.0, np.abs(fu))):
        raise NotSubsolution(f"Delta u >= f(u) fails; worst gap {float(gap_u.min()):.3g}")
    # F(t) = int_lo^t ds / f, cumulative Simpson on a fine grid
    fine = np.linspace(lo, hi, 4097) if hi > lo else np.array([lo, lo + 1e-12])
    inv = 1.0 / (np.asarray(nl.f(fine), dtype=float) * np.ones_like(fine))
    F = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(fine) * (inv[:-1] + inv[1:]))])
    Fu = np.interp(vals, fine, F)
    v = np.exp(nl.lam * (Fu - F[-1]))
    lap_v = discrete_laplacian(M, RadialProfile(u.grid, v))
    gap_v = lap_v - nl.lam * v[1:-1]
    if np.any(gap_v < -tol * nl.lam * v[1:-1]):
        raise NotSubsolution(f"Delta v >= lam v fails; worst relative gap {float((gap_v / (nl.lam * v[1:-1])).min()):.3g}")
    return fails("khasminskii", "bounded positive lam-subharmonic function built from the subsolution",
                 lam=nl.lam, u_range=[lo, hi], v_range=[float(v.min()), float(v.max())],
                 min_gap_u=float(gap_u.min()), min_relative_gap_v=float((gap_v / (nl.lam * v[1:-1])).min()),
                 stochastically_complete=sc)
