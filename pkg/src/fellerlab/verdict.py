"""Three-valued verdicts shared by every route, plus JSON helpers."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any, Iterable

import numpy as np


class Status(str, enum.Enum):
    HOLDS = "Holds"
    FAILS = "Fails"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class Verdict:
    status: Status
    route: str = ""
    reason: str = ""
    evidence: dict = field(default_factory=dict, compare=False)

    @property
    def holds(self) -> bool:
        return self.status is Status.HOLDS

    @property
    def fails(self) -> bool:
        return self.status is Status.FAILS

    @property
    def conclusive(self) -> bool:
        return self.status is not Status.INCONCLUSIVE

    def to_dict(self) -> dict:
        return {
            "status": self.status.value,
            "route": self.route,
            "reason": self.reason,
            "evidence": to_jsonable(self.evidence),
        }

    def __str__(self) -> str:
        return self.status.value


def holds(route="", reason="", **evidence) -> Verdict:
    return Verdict(Status.HOLDS, route, reason, evidence)


def fails(route="", reason="", **evidence) -> Verdict:
    return Verdict(Status.FAILS, route, reason, evidence)


def inconclusive(route="", reason="", **evidence) -> Verdict:
    return Verdict(Status.INCONCLUSIVE, route, reason, evidence)


def to_jsonable(obj: Any) -> Any:
    """Recursively convert to plain JSON types; non-finite floats become strings."""
    if isinstance(obj, enum.Enum):
        return obj.value
    if hasattr(obj, "to_dict"):
        return to_jsonable(obj.to_dict())
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def statuses(vs: Iterable[Verdict]) -> list[str]:
    return [v.status.value for v in vs]
