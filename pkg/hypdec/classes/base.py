"""
Base, generic classes supporting other more specialized classes.
"""
from abc import ABC, abstractmethod
from typing import Any

__all__ = [
    "Validateable",
    "HypdecWarning",
    "PreconditionError",
    "InvariantViolation",
    "ConjectureViolation",
]


class Validateable(ABC):
    """
    Frozen dataclass record checked once, on construction.

    The inherited ``__post_init__`` runs :meth:`coerce` and then :meth:`validate`, so
    :func:`dataclasses.replace` re-checks the new record as well.
    """

    def __post_init__(self):
        self.coerce()
        self.validate()

    def coerce(self):
        """Normalize field types in place through ``object.__setattr__``; a no-op by default."""

    @abstractmethod
    def validate(self):
        """:raises ValueError: if a field breaks an invariant of the record."""


class HypdecWarning(Warning):
    """Warning class for degenerate but legal inputs."""

    pass


class PreconditionError(ValueError):
    """Raised when the hypothesis of an estimator or selection routine does not hold."""

    pass


class InvariantViolation(ValueError):
    """Raised when a computed quantity breaks an invariant the library promises."""

    pass


class ConjectureViolation(Exception):
    """
    Raised when a conjecture instance measures below its pass threshold.

    :param message: Human readable description.
    :param bundle: Serializable description of the offending configuration.
    """

    def __init__(self, message: str, bundle: dict[str, Any] | None = None):
        super().__init__(message)
        self.bundle = bundle or {}
