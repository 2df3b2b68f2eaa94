"""Uniform report objects for inequality and property checks."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any


@dataclass
class CheckReport:
    """Outcome of a single two-sided comparison.

    Serializes to {check, lhs, rhs, tolerance, pass} plus optional details.
    """

    check: str
    lhs: float
    rhs: float
    tolerance: float
    passed: bool
    details: dict[str, Any] = field(default_factory=dict)

    def as_dict(self) -> dict[str, Any]:
        out = {
            "check": self.check,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "tolerance": self.tolerance,
            "pass": self.passed,
        }
        if self.details:
            out["details"] = self.details
        return out


def all_passed(reports) -> bool:
    return all(r.passed for r in reports)
