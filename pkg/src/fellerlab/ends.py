"""Two-ended warped products R x_f S^{m-1}.

Each end is capped off to a model manifold: g(r) = r near the pole, then a
blend into f(r) (positive end) or f(-r) (negative end).  The Feller
property is insensitive to compact changes, so the cap only fixes a
convention; verdicts come from the tails.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .classifier import ClassificationReport, classify
from .formula import Expr, Reflect, parse
from .integrals import DEFAULT_OPTIONS, TailOptions
from .verdict import Status, Verdict, fails, holds, inconclusive
from .warping import ExprPiece, ModelManifold, NonPositiveValue, WarpingFunction, make_model

DEFAULT_CAP_WINDOW = (0.5, 1.5)


class EmptyList(ValueError):
    pass


def _expr(x: Union[str, Expr, None], variable: str = "t") -> Optional[Expr]:
    if x is None or isinstance(x, Expr):
        return x
    return parse(x, variable)


@dataclass(frozen=True, eq=False)
class WarpedLine:
    """f on the whole line, with optional asymptotic forms at +inf and -inf (formulas in t)."""

    f: Expr
    dim: int
    tail_pos: Optional[Expr] = None
    tail_neg: Optional[Expr] = None
    label: str = ""

    def __post_init__(self):
        for name in ("f", "tail_pos", "tail_neg"):
            object.__setattr__(self, name, _expr(getattr(self, name)))
        if int(self.dim) != self.dim or self.dim < 2:
            raise ValueError("dimension must be an integer >= 2")
        if not self.label:
            object.__setattr__(self, "label", str(self.f))
        t = np.linspace(-16.0, 16.0, 641)
        s, _, _, _ = self.f.log_eval(t)
        if np.any(s <= 0):
            bad = float(t[np.argmax(s <= 0)])
            raise NonPositiveValue(f"f <= 0 at t = {bad:g}")

    @classmethod
    def parse(cls, f: str, dim: int, tail_pos: Optional[str] = None, tail_neg: Optional[str] = None):
        return cls(parse(f, "t"), dim, _expr(tail_pos), _expr(tail_neg), f)


def _end_model(W: WarpedLine, sign: int, window) -> ModelManifold:
    declared = W.tail_pos if sign > 0 else W.tail_neg
    if declared is not None:
        tail = declared if sign > 0 else Reflect(declared)
        source = "declared"
    else:
        tail = W.f if sign > 0 else Reflect(W.f)
        source = "f"
    side = "+" if sign > 0 else "-"
    label = f"end{1 if sign > 0 else 2} of {W.label} (t -> {side}inf, tail from {source})"
    g = WarpingFunction(ExprPiece("r"), ExprPiece(tail), tuple(window), label)
    return make_model(W.dim, g, name=label)


def split_ends(W: WarpedLine, window: Sequence[float] = DEFAULT_CAP_WINDOW) -> tuple[ModelManifold, ModelManifold]:
    """Capped models for the ends at +inf and -inf."""
    return _end_model(W, +1, window), _end_model(W, -1, window)


def combine_end_verdicts(vs: Sequence[Verdict]) -> Verdict:
    """All-of combination: Fails if any end fails, Holds only if every end holds."""
    vs = list(vs)
    if not vs:
        raise EmptyList("no end verdicts to combine")
    statuses = [v.status.value for v in vs]
    if any(v.fails for v in vs):
        bad = [i + 1 for i, v in enumerate(vs) if v.fails]
        return fails("ends", f"end(s) {bad} not Feller", ends=statuses, failing=bad)
    if all(v.holds for v in vs):
        return holds("ends", "every end is Feller", ends=statuses)
    open_ = [i + 1 for i, v in enumerate(vs) if not v.conclusive]
    return inconclusive("ends", f"end(s) {open_} undecided", ends=statuses, undecided=open_)


@dataclass(frozen=True)
class WarpedLineReport:
    ends: tuple[ClassificationReport, ClassificationReport]
    feller: Verdict
    window: tuple

    def to_dict(self) -> dict:
        return {"ends": [e.to_dict() for e in self.ends], "feller": self.feller.to_dict(),
                "cap_window": list(self.window)}


def classify_warped_line(W: WarpedLine, window: Sequence[float] = DEFAULT_CAP_WINDOW,
                         opts: TailOptions = DEFAULT_OPTIONS) -> WarpedLineReport:
    models = split_ends(W, window)
    with ThreadPoolExecutor(max_workers=2) as pool:
        reports = tuple(pool.map(lambda M: classify(M, opts), models))
    return WarpedLineReport(reports, combine_end_verdicts([r.feller for r in reports]), tuple(window))


__all__ = ["WarpedLine", "EmptyList", "split_ends", "combine_end_verdicts", "classify_warped_line",
           "WarpedLineReport", "DEFAULT_CAP_WINDOW"]
