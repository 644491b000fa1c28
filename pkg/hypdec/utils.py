"""
Classes and functions that provide general utility.
"""
import math
import os
from collections.abc import Iterable, Sequence

import numpy as np

__all__ = [
    "compensated_sum",
    "fit_exponent",
    "is_power_of_two",
    "dyadic_bucket",
    "parse_band",
    "parse_scales",
    "parse_criterion_scales",
    "parse_pair",
    "worker_count",
]

THREADS_ENV = "HYPDEC_THREADS"
"""Environment variable capping the number of worker threads."""


def compensated_sum(values: np.ndarray | Iterable[float]) -> float:
    """
    Sum floating point values exactly rounded.

    The result does not depend on the order of the summands, so parallel reductions stay
    bit-reproducible.

    :param values: Real values, any shape.
    :returns: The correctly rounded sum.
    """
    if isinstance(values, np.ndarray):
        return math.fsum(values.ravel().tolist())
    return math.fsum(values)


def fit_exponent(scales: Sequence[float], values: Sequence[float]) -> float:
    """
    Fit ``values ~ scales ** e`` by least squares in log2-log2 coordinates.

    :param scales: At least two positive scales.
    :param values: Positive measured values, one per scale.
    :returns: The fitted exponent ``e``.
    """
    if len(scales) != len(values):
        raise ValueError(f"scales and values differ in length (got {len(scales)} and {len(values)})")
    if len(scales) < 2:
        raise ValueError(f"at least two scales are needed (got {len(scales)})")
    xs = np.log2(np.asarray(scales, dtype=float))
    ys = np.asarray(values, dtype=float)
    if np.any(ys <= 0):
        raise ValueError("values must be positive to fit an exponent")
    slope, _ = np.polyfit(xs, np.log2(ys), 1)
    return float(slope)


def is_power_of_two(value: float) -> bool:
    """Check if a value is an exact (possibly negative) power of two."""
    if value <= 0 or not math.isfinite(value):
        return False
    mantissa, _ = math.frexp(value)
    return mantissa == 0.5


def dyadic_bucket(value: float, lowest: int | None = None, highest: int | None = None) -> int:
    """
    Return the dyadic class ``k`` with ``value`` in ``(2**k, 2**(k+1)]``.

    Buckets are half-open on the left, so a value on a bucket edge goes down. Values beyond
    ``lowest`` or ``highest`` fall into the outermost class.

    :param value: A positive number.
    :param lowest: Smallest class returned, unbounded if `None`.
    :param highest: Largest class returned, unbounded if `None`.
    :returns: The integer ``k``.
    """
    if value <= 0:
        raise ValueError(f"value must be positive (got {value})")
    if lowest is not None and highest is not None and lowest > highest:
        raise ValueError(f"empty class range (got {lowest} > {highest})")
    mantissa, exponent = math.frexp(value)
    # mantissa in [0.5, 1): value in [2**(e-1), 2**e)
    k = exponent - 2 if mantissa == 0.5 else exponent - 1
    if lowest is not None:
        k = max(k, lowest)
    if highest is not None:
        k = min(k, highest)
    return k


def parse_band(value: str) -> tuple[float, float]:
    """
    Parse a ratio band written as ``LO:HI``.

    :param value: String such as ``"0.25:4"``.
    :returns: The pair ``(LO, HI)``.
    """
    try:
        lo_str, hi_str = value.split(":")
        lo, hi = float(lo_str), float(hi_str)
    except ValueError as e:
        raise ValueError(f'band must be written as "LO:HI" (got "{value}")') from e
    if not 0 < lo < hi:
        raise ValueError(f"band must satisfy 0 < LO < HI (got {lo}, {hi})")
    return lo, hi


def parse_scales(value: str) -> list[int]:
    """
    Parse a comma separated list of scales.

    Entries may be plain integers or powers written as ``2^k``.

    :param value: String such as ``"64,256"`` or ``"2^6,2^8"``.
    :returns: The scales in ascending order.
    """
    scales: list[int] = []
    for part in value.replace(" ", "").split(","):
        if not part:
            continue
        try:
            if "^" in part:
                base, exp = part.split("^")
                scales.append(int(base) ** int(exp))
            else:
                scales.append(int(part))
        except ValueError as e:
            raise ValueError(f'invalid scale "{part}"') from e
    if not scales:
        raise ValueError("scale list is empty")
    return sorted(scales)


def parse_criterion_scales(value: str) -> tuple[int, tuple[int, ...]]:
    """Parse ``"N=SCALES"`` into a criterion number and its scales."""
    number, sep, scales = value.partition("=")
    if not sep:
        raise ValueError(f'expected "N=SCALES" (got "{value}")')
    try:
        return int(number), tuple(parse_scales(scales))
    except ValueError as e:
        raise ValueError(f'expected "N=SCALES" (got "{value}")') from e


def parse_pair(value: str) -> tuple[int, int]:
    """Parse ``"A,K"`` into two integers."""
    try:
        first, second = value.split(",")
        return int(first), int(second)
    except ValueError as e:
        raise ValueError(f'expected two comma separated integers (got "{value}")') from e


def worker_count() -> int:
    """
    Number of worker threads to use.

    Honors ``HYPDEC_THREADS`` when set to a positive integer; invalid values are ignored.
    """
    default = os.cpu_count() or 1
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return default
    try:
        value = int(raw)
    except ValueError:
        return default
    return max(1, value)
