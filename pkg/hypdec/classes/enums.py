"""
General purpose enumerations.
"""
from enum import Enum, IntEnum, auto, unique

__all__ = [
    "Surface",
    "VerticalProfile",
    "RestrictMode",
    "DilationAxis",
    "EnsembleKind",
    "FamilyKind",
    "BroadMethod",
    "SquareFunctionMode",
    "NarrowBroadLabel",
    "BroadNarrowTerm",
    "GmoCase",
    "NormMode",
    "ExitCode",
    "CriterionStatus",
]


class _StringifiableEnum(Enum):
    def __str__(self) -> str:
        return self.name.lower().replace("_", "-")

    @classmethod
    def from_str(cls, value: str):
        """
        Look up a member from its dashed or underscored lowercase name.

        :param value: Name such as ``"random-phase"`` or ``"random_phase"``.
        :returns: The matching member.
        :raises ValueError: if no member has that name.
        """
        key = value.strip().upper().replace("-", "_")
        try:
            return cls[key]
        except KeyError as e:
            raise ValueError(f"unknown {cls.__name__} (got {value!r})") from e


@unique
class Surface(_StringifiableEnum):
    """Graph surface carrying the density. Elliptic is a comparison mode."""

    HYPERBOLIC = 0
    ELLIPTIC = 1


@unique
class VerticalProfile(_StringifiableEnum):
    """Profile of the 1/R thickening of the surface in the third frequency coordinate."""

    GAUSSIAN = 0
    BOX = 1


@unique
class RestrictMode(_StringifiableEnum):
    """Frequency restriction modes."""

    SHARP = auto()
    SMOOTH = auto()


@unique
class DilationAxis(_StringifiableEnum):
    """Axis of a nonisotropic dilation."""

    HORIZONTAL = auto()
    VERTICAL = auto()


@unique
class EnsembleKind(_StringifiableEnum):
    """Input families used to measure decoupling and restriction constants."""

    RANDOM_PHASE = auto()
    FOCUSING = auto()
    LINE_CONCENTRATED = auto()
    BUSH = auto()
    SINGLE_CAP = auto()


@unique
class FamilyKind(_StringifiableEnum):
    """Generators of direction-separated line families."""

    BUSH = auto()
    BRUSH = auto()
    PARALLEL = auto()
    RANDOM = auto()


@unique
class BroadMethod(_StringifiableEnum):
    """Broad norm evaluation methods."""

    EXACT = auto()
    GREEDY = auto()


@unique
class SquareFunctionMode(_StringifiableEnum):
    """Geometry used by the square function estimate."""

    PLANES = auto()
    CAPS = auto()


@unique
class NormMode(_StringifiableEnum):
    """Spatial domain for L^p norms over R^3: the periodized box or the w_{B_R} weight."""

    TORUS = auto()
    WEIGHTED = auto()


@unique
class NarrowBroadLabel(_StringifiableEnum):
    """Label attached to a ball by the narrow/broad dichotomy."""

    NARROW = auto()
    BROAD = auto()
    UNLABELED = auto()


@unique
class BroadNarrowTerm(IntEnum):
    """Terms of the pointwise broad-narrow inequality, in order."""

    SQUARE = 1
    STRIP = 2
    BROAD = 3

    def __str__(self) -> str:
        return self.name.lower()


@unique
class GmoCase(IntEnum):
    """Cases of the pointwise argument behind linear dyadic decoupling."""

    DOMINANT = 1
    TRANSVERSE = 2
    STRIP = 3

    def __str__(self) -> str:
        return self.name.lower()


@unique
class ExitCode(IntEnum):
    """Process exit codes of the experiment runner."""

    OK = 0
    INVARIANT = 2
    CONJECTURE = 3
    PARTIAL = 4


@unique
class CriterionStatus(_StringifiableEnum):
    """Outcome of one acceptance criterion in a verification run."""

    PASS = auto()
    FAIL = auto()
    ERROR = auto()
    SKIPPED = auto()
