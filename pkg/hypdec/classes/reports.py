"""
Report records produced by the estimators.
"""
import math
from dataclasses import dataclass, field
from typing import Any

from .base import Validateable

__all__ = [
    "RatioReport",
    "RestrictionReport",
]


@dataclass(frozen=True)
class RatioReport(Validateable):
    """
    Outcome of one decoupling-type measurement ``lhs <= C * rhs``.

    A report with ``rhs == 0`` is degenerate; its ratio is 0 when ``lhs`` vanishes too.
    """

    lhs: float
    rhs: float
    R: float
    parameters: dict[str, Any] = field(default_factory=dict)
    companion: "RatioReport | None" = None

    def validate(self):
        if not (self.lhs >= 0 and math.isfinite(self.lhs)):
            raise ValueError(f"lhs must be finite and nonnegative (got {self.lhs})")
        if not (self.rhs >= 0 and math.isfinite(self.rhs)):
            raise ValueError(f"rhs must be finite and nonnegative (got {self.rhs})")
        if self.rhs == 0 and self.lhs > 0:
            raise ValueError(f"positive lhs against vanishing rhs (got lhs={self.lhs})")

    @property
    def degenerate(self) -> bool:
        """`True` when the right-hand side vanishes."""
        return self.rhs == 0

    @property
    def ratio(self) -> float:
        return 0.0 if self.degenerate else self.lhs / self.rhs

    @property
    def reverse_ratio(self) -> float:
        """``rhs / lhs``, used for two-sided (recoupling) estimates."""
        if self.lhs == 0:
            return 0.0 if self.rhs == 0 else math.inf
        return self.rhs / self.lhs

    def as_row(self) -> dict[str, Any]:
        """Flatten the report into a CSV-ready mapping."""
        row: dict[str, Any] = {"R": self.R, "lhs": self.lhs, "rhs": self.rhs, "ratio": self.ratio}
        for key in sorted(self.parameters):
            row[key] = self.parameters[key]
        if self.companion is not None:
            row["companion_ratio"] = self.companion.ratio
        return row


@dataclass(frozen=True)
class RestrictionReport(Validateable):
    """Outcome of one restriction-type measurement ``int |Ef|^p`` against a norm of ``f``."""

    R: float
    p: float
    lhs: float
    rhs: float
    ensemble: str = ""
    exponent: float | None = None
    parameters: dict[str, Any] = field(default_factory=dict)

    def validate(self):
        if not self.p > 2:
            raise ValueError(f"p must exceed 2 (got {self.p})")
        if self.lhs < 0 or self.rhs < 0:
            raise ValueError(f"entries must be nonnegative (got lhs={self.lhs}, rhs={self.rhs})")

    @property
    def ratio(self) -> float:
        return 0.0 if self.rhs == 0 else self.lhs / self.rhs

    def as_row(self) -> dict[str, Any]:
        row: dict[str, Any] = {"R": self.R, "p": self.p, "lhs": self.lhs, "rhs": self.rhs, "ratio": self.ratio}
        row["ensemble"] = self.ensemble
        for key in sorted(self.parameters):
            row[key] = self.parameters[key]
        return row
