"""Outcome records shared by every checker."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any


@dataclass
class CheckReport:
    """One identity or inequality check.

    The inequality is read as ``lhs <= C * rhs_without_constant``;
    ``implied_constant`` is the smallest ``C`` that makes it hold and
    ``passed`` compares it with ``budget``.  Identity checks put their
    mismatch in ``lhs`` with ``rhs_without_constant = 1``.
    """

    name: str
    lhs: float
    rhs_without_constant: float
    budget: float = math.inf
    implied_constant: float | None = None
    passed: bool | None = None
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.lhs = float(self.lhs)
        self.rhs_without_constant = float(self.rhs_without_constant)
        if self.implied_constant is None:
            self.implied_constant = implied_constant(self.lhs, self.rhs_without_constant)
        if self.passed is None:
            self.passed = bool(self.implied_constant <= self.budget)

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "lhs": _json_float(self.lhs),
            "rhs_without_constant": _json_float(self.rhs_without_constant),
            "implied_constant": _json_float(self.implied_constant),
            "pass": bool(self.passed),
            "meta": {k: _json_value(v) for k, v in self.meta.items()},
        }

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"[{status}] {self.name}: lhs={self.lhs:.6g} "
                f"rhs/C={self.rhs_without_constant:.6g} C={self.implied_constant:.6g} "
                f"budget={self.budget:.6g}")


def implied_constant(lhs: float, rhs: float) -> float:
    """Smallest ``C >= 0`` with ``lhs <= C * rhs``."""
    if lhs <= 0.0:
        return 0.0
    if rhs > 0.0:
        return lhs / rhs
    return math.inf


def _json_float(x: float):
    x = float(x)
    if math.isfinite(x):
        return x
    return "inf" if x > 0 else ("-inf" if x < 0 else "nan")


def _json_value(v):
    if isinstance(v, float):
        return _json_float(v)
    if isinstance(v, (list, tuple)):
        return [_json_value(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _json_value(x) for k, x in v.items()}
    if hasattr(v, "item"):
        return _json_value(v.item())
    return v
