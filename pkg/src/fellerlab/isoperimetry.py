"""Faber-Krahn route to the Feller property.

A profile Lambda bounds the first Dirichlet eigenvalue of a domain by a
function of its volume.  The associated volume function V(t) is defined by

    t = int_0^{V(t)} ds / (s Lambda(s)),

and differentiating gives t V'/V = t Lambda(V(t)).  All integrals run in
x = log s, where the integrand 1/Lambda(e^x) is smooth and tame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional, Union

import numpy as np
from scipy.optimize import brentq

from .formula import Expr, parse
from .integrals import DEFAULT_OPTIONS, classify_tail
from .verdict import Verdict, holds, inconclusive

S_MIN = 1e-12
S_CAP = 1e30
_NODES_PER_UNIT = 16
_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


class IsoperimetryError(ValueError):
    pass


class Inadmissible(IsoperimetryError):
    pass


class MonotonicityFailure(IsoperimetryError):
    pass


LogFn = Callable[[np.ndarray], np.ndarray]


def _log_of(fn: Union[str, Expr, Callable, float], what: str) -> tuple[LogFn, str]:
    """log of a positive function of s, given as formula, expression, callable or constant."""
    if isinstance(fn, str):
        fn = parse(fn, "s")
    if isinstance(fn, Expr):
        e = fn

        def logf(s):
            with np.errstate(over="ignore", invalid="ignore"):
                sign, l, _, _ = e.log_eval(np.asarray(s, dtype=float))
            if np.any(sign <= 0):
                raise IsoperimetryError(f"{what} must be positive")
            return l

        return logf, str(e)
    if callable(fn):
        def logf(s):
            v = np.asarray(fn(np.asarray(s, dtype=float)), dtype=float)
            if np.any(v <= 0):
                raise IsoperimetryError(f"{what} must be positive")
            with np.errstate(divide="ignore"):
                return np.log(v)

        return logf, getattr(fn, "__name__", what)
    c = float(fn)
    if c <= 0:
        raise IsoperimetryError(f"{what} must be positive")
    return (lambda s: np.full(np.shape(s), math.log(c))), f"{c:g}"


@dataclass(frozen=True, eq=False)
class FaberKrahnProfile:
    log_lambda: LogFn
    s_max: float = math.inf
    label: str = "Lambda"
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_function(cls, Lambda, s_max: float = math.inf, label: str = "") -> "FaberKrahnProfile":
        logf, name = _log_of(Lambda, "Lambda")
        P = cls(logf, float(s_max), label or name)
        P.check_decreasing()
        return P

    def __call__(self, s):
        return np.exp(self.log_lambda(np.asarray(s, dtype=float)))

    @property
    def s_top(self) -> float:
        return min(self.s_max, S_CAP)

    def check_decreasing(self, samples: int = 2001) -> None:
        s = np.geomspace(S_MIN, self.s_top, samples)
        l = self.log_lambda(s)
        if np.any(np.diff(l) > 1e-12 * np.maximum(1.0, np.abs(l[1:]))):
            raise MonotonicityFailure("Lambda must be nonincreasing in s")

    @cached_property
    def integrability_check(self):
        """Ratio test on 1/(s Lambda(s)) near 0, in the variable x = -log s."""
        a = max(1.0, -math.log(self.s_top))
        # s = e^{-x} stays a normal float up to x ~ 708
        return classify_tail(lambda x: -self.log_lambda(np.exp(-x)), a, DEFAULT_OPTIONS, horizon=700.0)

    @property
    def admissible(self) -> bool:
        return self.integrability_check.convergent

    @cached_property
    def _table(self):
        if not self.admissible:
            raise Inadmissible(f"1/(s Lambda(s)) is not integrable at 0 ({self.integrability_check.reason})")
        x0, x1 = math.log(S_MIN), math.log(self.s_top)
        n = max(8, int(math.ceil((x1 - x0) * _NODES_PER_UNIT)))
        x = np.linspace(x0, x1, n + 1)
        cells = _gl_cells(self.log_lambda, x[:-1], x[1:])
        # below S_MIN: 1/Lambda ~ c s^a, so the missing piece is (1/Lambda(S_MIN))/a
        h = 1e-3
        a = -(self.log_lambda(np.exp(x0 + h)) - self.log_lambda(np.exp(x0 - h)))[()] / (2 * h)
        if not a > 0:
            raise Inadmissible("1/Lambda does not vanish at 0 like a power; cannot extrapolate below s_min")
        head = math.exp(-float(self.log_lambda(np.array(S_MIN)))) / a
        T = head + np.concatenate([[0.0], np.cumsum(cells)])
        return x, T, a, head

    def t_of_v(self, V) -> np.ndarray:
        """t = int_0^V ds/(s Lambda(s))."""
        x, T, a, head = self._table
        V = np.atleast_1d(np.asarray(V, dtype=float))
        if np.any(V <= 0) or np.any(V > self.s_top * (1 + 1e-12)):
            raise IsoperimetryError("volume outside (0, s_max]")
        lv = np.log(V)
        out = np.empty_like(lv)
        small = lv < x[0]
        out[small] = head * np.exp(a * (lv[small] - x[0]))
        big = ~small
        if np.any(big):
            i = np.clip(np.searchsorted(x, lv[big], side="right") - 1, 0, x.size - 2)
            out[big] = T[i] + _gl_cells(self.log_lambda, x[i], lv[big])
        return out

    @property
    def t_max(self) -> float:
        x, T, _, _ = self._table
        return float(T[-1])


def _gl_cells(log_lambda: LogFn, lo, hi) -> np.ndarray:
    lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
    half = 0.5 * (hi - lo)
    pts = (lo + half)[..., None] + half[..., None] * _GL_X
    vals = np.exp(-log_lambda(np.exp(pts.ravel()))).reshape(pts.shape)
    return half * (vals @ _GL_W)


def v_from_lambda(P: FaberKrahnProfile, t: float) -> float:
    """Invert t = int_0^V ds/(s Lambda(s)) for V."""
    if not t > 0:
        raise ValueError("t must be positive")
    x, T, a, head = P._table
    if t <= head:
        return S_MIN * (t / head) ** (1.0 / a)
    if t > T[-1]:
        raise IsoperimetryError(f"t = {t:g} exceeds the range covered up to s = {P.s_top:g}")
    i = int(np.clip(np.searchsorted(T, t) - 1, 0, x.size - 2))
    f = lambda lv: float(P.t_of_v(math.exp(lv))[0]) - t
    lv = brentq(f, x[i], x[i + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    return math.exp(lv)


def v_and_index(P: FaberKrahnProfile, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """V(t) and t V'(t)/V(t) = t Lambda(V(t)) on an array of times."""
    t = np.asarray(t, dtype=float)
    V = np.array([v_from_lambda(P, float(s)) for s in t])
    return V, t * P(V)


@dataclass(frozen=True)
class RegularityResult:
    passed: bool
    bounded: bool
    nondecreasing: bool
    T: float
    t: list
    index: list
    reason: str = ""

    def __bool__(self):
        return self.passed

    def to_dict(self) -> dict:
        return {"passed": self.passed, "bounded": self.bounded, "nondecreasing": self.nondecreasing,
                "T": self.T, "t": self.t, "index": self.index, "reason": self.reason}


def check_regularity(P: FaberKrahnProfile, T: float = math.inf, t_range: Optional[tuple] = None,
                     per_decade: int = 16, bound: float = 1e6) -> RegularityResult:
    """Sample t V'/V on a log grid: bounded for t <= 2T, nondecreasing for t > T.

    Only times with V(t) >= s_min are sampled.  Unboundedness can only be
    inferred from a finite window: the index counts as unbounded if it
    exceeds ``bound`` or if log(index) rises toward t = 0 at a power rate
    (local slope below -0.1) in each of the smallest sampled decades (up to
    three, at least two).
    """
    if t_range is None:
        head = P._table[3]
        t_range = (max(1e-8, head * (1 + 1e-9)), min(1e8, P.t_max * (1 - 1e-9)))
    lo, hi = t_range
    n = max(8, int(round(math.log10(hi / lo) * per_decade)) + 1)
    t = np.geomspace(lo, hi, n)
    _, idx = v_and_index(P, t)
    early = t <= 2 * T
    late = t > T
    bounded = True
    reason = []
    if np.any(early):
        te, ie = t[early], idx[early]
        if not np.all(np.isfinite(ie)) or ie.max() > bound:
            bounded = False
        elif te[-1] >= te[0] * 1e2:
            lt, li = np.log10(te), np.log(ie)
            slopes = []
            for k in range(min(3, int(lt[-1] - lt[0]))):
                sel = (lt >= lt[0] + k) & (lt <= lt[0] + k + 1)
                slopes.append(np.polyfit(lt[sel], li[sel], 1)[0] / math.log(10.0))
            if all(sl < -0.1 for sl in slopes):
                bounded = False
        if not bounded:
            reason.append("t V'/V grows without bound as t -> 0")
    nondecreasing = True
    if math.isfinite(T) and np.any(late):
        il = idx[late]
        drops = np.diff(il) < -1e-10 * np.maximum(1.0, np.abs(il[1:]))
        nondecreasing = not bool(np.any(drops))
        if not nondecreasing:
            reason.append("t V'/V decreases somewhere beyond T")
    return RegularityResult(bounded and nondecreasing, bounded, nondecreasing, T, t.tolist(), idx.tolist(),
                            "; ".join(reason))


def gaussian_bound(P: FaberKrahnProfile, consts: tuple = (1.0, 1.0, 5.0), d: float = 0.0, t: float = 1.0) -> float:
    """C / V(c t) * exp(-d^2 / (D t))."""
    C, c, D = consts
    if not D > 4:
        raise ValueError("D must exceed 4")
    if not t > 0:
        raise ValueError("t must be positive")
    return C / v_from_lambda(P, c * t) * math.exp(-d * d / (D * t))


def cheeger_reduce(iso, s_max: float = math.inf, label: str = "") -> FaberKrahnProfile:
    """Lambda(s) = (g(s)/s)^2 / 4 from an isoperimetric function g with g(s)/s nonincreasing."""
    log_g, name = _log_of(iso, "isoperimetric function")
    s = np.geomspace(S_MIN, min(s_max, S_CAP), 2001)
    q = log_g(s) - np.log(s)
    if np.any(np.diff(q) > 1e-12 * np.maximum(1.0, np.abs(q[1:]))):
        raise MonotonicityFailure("g(s)/s must be nonincreasing")
    log_lambda = lambda s: 2.0 * (log_g(s) - np.log(s)) - math.log(4.0)
    return FaberKrahnProfile(log_lambda, float(s_max), label or f"cheeger[{name}]", {"isoperimetric": name})


def feller_from_faber_krahn(P: FaberKrahnProfile, T: float = math.inf, **kw) -> Verdict:
    """Sufficient condition only: Holds or Inconclusive, never Fails."""
    chk = P.integrability_check
    if not chk.convergent:
        return inconclusive("isoperimetry", "profile not admissible: 1/(s Lambda) not integrable at 0",
                            integrability=chk)
    reg = check_regularity(P, T, **kw)
    if not reg.passed:
        return inconclusive("isoperimetry", f"regularity fails: {reg.reason}", integrability=chk,
                            regularity={k: v for k, v in reg.to_dict().items() if k not in ("t", "index")})
    return holds("isoperimetry", "admissible Faber-Krahn profile with regular volume function",
                 integrability=chk, index_range=[min(reg.index), max(reg.index)], T=T)


__all__ = [
    "FaberKrahnProfile", "Inadmissible", "MonotonicityFailure", "IsoperimetryError", "RegularityResult",
    "v_from_lambda", "v_and_index", "check_regularity", "gaussian_bound", "cheeger_reduce",
    "feller_from_faber_krahn", "S_MIN",
]
