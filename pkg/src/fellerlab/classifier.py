"""Parabolicity, stochastic completeness, Feller property and volume of models.

All four classifications reduce to L^1(+inf) membership tests run by
:mod:`fellerlab.integrals`:

* parabolic            iff  1/g^{m-1} is not integrable at infinity
* stochastically complete iff  (int_0^r g^{m-1}) / g^{m-1}(r) is not integrable
* Feller               iff  1/g^{m-1} is integrable, or it is not and
                            (int_r^inf g^{m-1}) / g^{m-1}(r) is not integrable

Feller holds exactly when one of the two branches holds, so a verdict is
reached as soon as either branch is conclusive in the right direction.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .integrals import (
    DEFAULT_OPTIONS,
    ConvergenceVerdict,
    TailOptions,
    classify_tail,
    tail_of_volume_ratio,
    volume_grid,
)
from .verdict import Status, Verdict, fails, holds, inconclusive, to_jsonable
from .warping import ModelManifold

SCHEMA_VERSION = "fellerlab.classification/1"
INFINITY = math.inf


class InternalConsistencyError(RuntimeError):
    """Two conclusive branches that cannot both be right."""


def _inverse_density(M: ModelManifold, opts: TailOptions, a: float = 1.0) -> ConvergenceVerdict:
    k = M.dim - 1
    g = M.g
    return classify_tail(lambda r: -k * g.log(r), a, opts, g.domain_end, lambda r: -k * g.logd(r)[1])


def _density(M: ModelManifold, opts: TailOptions, a: float) -> ConvergenceVerdict:
    k = M.dim - 1
    g = M.g
    return classify_tail(lambda r: k * g.log(r), a, opts, g.domain_end, lambda r: k * g.logd(r)[1])


def classify_parabolic(M: ModelManifold, opts: TailOptions = DEFAULT_OPTIONS) -> Verdict:
    c = _inverse_density(M, opts)
    ev = {"inverse_area_density": c}
    if c.divergent:
        return holds("integral", "1/g^{m-1} not integrable", **ev)
    if c.convergent:
        return fails("integral", "1/g^{m-1} integrable", **ev)
    return inconclusive("integral", c.reason, **ev)


def classify_stochastically_complete(M: ModelManifold, opts: TailOptions = DEFAULT_OPTIONS) -> Verdict:
    c = tail_of_volume_ratio(M, "stochastic", opts)
    ev = {"volume_ratio": c}
    if c.divergent:
        return holds("integral", "inner volume ratio not integrable", **ev)
    if c.convergent:
        return fails("integral", "inner volume ratio integrable", **ev)
    return inconclusive("integral", c.reason, **ev)


def classify_feller(M: ModelManifold, opts: TailOptions = DEFAULT_OPTIONS) -> Verdict:
    m1 = _inverse_density(M, opts)
    m2 = tail_of_volume_ratio(M, "feller", opts)
    ev = {"inverse_area_density": m1, "outer_volume_ratio": m2}
    if m1.convergent and m2.convergent:
        # both integrable would force g^{m-1} and its inverse into L^1 at once
        raise InternalConsistencyError(
            f"{M.label}: 1/g^{{m-1}} and the outer volume ratio both classified integrable")
    if m1.convergent:
        return holds("integral", "1/g^{m-1} integrable", branch="model1", **ev)
    if m2.divergent:
        why = "g^{m-1} not integrable, condition trivially satisfied" if m2.trivial else \
            "outer volume ratio not integrable"
        return holds("integral", why, branch="model2", **ev)
    if m1.divergent and m2.convergent:
        return fails("integral", "1/g^{m-1} and outer volume ratio: neither branch holds", **ev)
    return inconclusive("integral", "no branch conclusive", **ev)


def classify_volume(M: ModelManifold, opts: TailOptions = DEFAULT_OPTIONS) -> tuple[Verdict, float]:
    """Verdict on finiteness of vol(M) and the volume (inf when infinite, nan when unknown)."""
    vol = volume_grid(M, 1.0, opts).volume
    ev = {"area_density": vol}
    if vol.convergent:
        value = M.sphere_constant * vol.partial_value
        return holds("integral", "g^{m-1} integrable", **ev), value
    if vol.divergent:
        return fails("integral", "g^{m-1} not integrable", **ev), INFINITY
    return inconclusive("integral", vol.reason, **ev), math.nan


@dataclass(frozen=True)
class VolumeFunctions:
    area: float
    residual_volume: float
    log_area: float
    log_residual_volume: float

    def __iter__(self):
        yield self.area
        yield self.residual_volume


def volume_functions(M: ModelManifold, r: float, opts: TailOptions = DEFAULT_OPTIONS) -> VolumeFunctions:
    """Area of the geodesic sphere of radius r and the volume outside B_r.

    The log values stay meaningful when the plain ones under- or overflow.
    """
    if r <= 0:
        raise ValueError("radius must be positive")
    log_c = math.log(M.sphere_constant)
    log_area = log_c + float(M.log_area_density(np.array([r]))[0])
    tail = _density(M, opts, r)
    if tail.convergent:
        log_res = log_c + tail.log_partial
    elif tail.divergent:
        log_res = INFINITY
    else:
        log_res = math.nan
    with np.errstate(over="ignore"):
        area = float(np.exp(log_area))
        res = float(np.exp(log_res)) if not math.isnan(log_res) else math.nan
    return VolumeFunctions(area, res, log_area, log_res)


def green_kernel(M: ModelManifold, r: float, opts: TailOptions = DEFAULT_OPTIONS) -> float:
    """int_r^inf dt / g^{m-1}(t); ``INFINITY`` on parabolic models, nan when undecided."""
    if r <= 0:
        raise ValueError("radius must be positive")
    c = _inverse_density(M, opts, a=r)
    if c.divergent:
        return INFINITY
    if c.convergent:
        return c.partial_value
    return math.nan


@dataclass
class ClassificationReport:
    model: str
    dim: int
    parabolic: Verdict
    stochastically_complete: Verdict
    feller: Verdict
    volume_finite: Verdict
    volume_value: float
    green_kernel_at: Optional[list] = None
    consistency_flags: list = field(default_factory=list)

    @property
    def violations(self) -> list:
        return [f for f in self.consistency_flags if f["status"] == "violated"]

    def to_dict(self, evidence: bool = True) -> dict:
        def v(x: Verdict):
            d = x.to_dict()
            if not evidence:
                d.pop("evidence")
            return d

        return to_jsonable({
            "schema": SCHEMA_VERSION,
            "model": self.model,
            "dim": self.dim,
            "parabolic": v(self.parabolic),
            "stochastically_complete": v(self.stochastically_complete),
            "feller": v(self.feller),
            "volume_finite": v(self.volume_finite),
            "volume_value": self.volume_value,
            "green_kernel_at": self.green_kernel_at,
            "consistency_flags": self.consistency_flags,
        })

    def to_json(self, evidence: bool = True) -> str:
        return json.dumps(self.to_dict(evidence), sort_keys=True, indent=2)


def _implication(name: str, premise: bool, conclusion: bool) -> dict:
    status = "vacuous" if not premise else ("ok" if conclusion else "violated")
    return {"name": name, "status": status}


def consistency_checks(parabolic: Verdict, sc: Verdict, feller: Verdict, volume: Verdict,
                       green_profile: Optional[list]) -> list:
    vanishing = False
    if parabolic.fails and green_profile:
        vals = [g for _, g in green_profile]
        vanishing = all(np.isfinite(vals)) and all(b < a for a, b in zip(vals, vals[1:]))
    return [
        _implication("parabolic => stochastically complete", parabolic.holds, not sc.fails),
        _implication("stochastically incomplete => Feller", sc.fails, not feller.fails),
        _implication("infinite volume => Feller", volume.fails, not feller.fails),
        _implication("non-parabolic with vanishing Green kernel => Feller", vanishing, not feller.fails),
    ]


def classify(M: ModelManifold, opts: TailOptions = DEFAULT_OPTIONS,
             green_radii=(1.0, 2.0, 4.0, 8.0, 16.0)) -> ClassificationReport:
    parabolic = classify_parabolic(M, opts)
    sc = classify_stochastically_complete(M, opts)
    feller = classify_feller(M, opts)
    volume, value = classify_volume(M, opts)
    profile = None
    if parabolic.fails and green_radii:
        profile = [(float(r), green_kernel(M, r, opts)) for r in green_radii if r < M.g.domain_end]
    flags = consistency_checks(parabolic, sc, feller, volume, profile)
    return ClassificationReport(M.label, M.dim, parabolic, sc, feller, volume, value, profile, flags)


__all__ = [
    "SCHEMA_VERSION", "INFINITY", "InternalConsistencyError", "Status", "ClassificationReport",
    "VolumeFunctions", "classify", "classify_parabolic", "classify_stochastically_complete",
    "classify_feller", "classify_volume", "volume_functions", "green_kernel", "consistency_checks",
]
