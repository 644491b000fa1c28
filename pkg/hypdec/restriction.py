"""
Restriction and broad restriction ratios on the ball ``B_R`` centered at the origin.
"""
import logging
from collections.abc import Sequence

import numpy as np

from .broadnarrow import broad_values, cell_squares, separated_pairs
from .classes.base import InvariantViolation
from .classes.reports import RatioReport, RestrictionReport
from .field import ExtensionGrid, FreqDensity, cap_avg_l2, reduce_slices, restrict_freq
from .geom import Square, tile
from .utils import compensated_sum, fit_exponent, is_power_of_two

__all__ = [
    "CRITICAL_P",
    "restriction_ratio",
    "broad_restriction_ratio",
    "bilinear_bound",
    "fit_restriction",
]

logger = logging.getLogger(__name__)

CRITICAL_P = 22 / 7
"""Exponent at which the local restriction estimate is established for the hyperbolic paraboloid."""
K_COUPLING = "R^(eps^10)"
A_COUPLING = "R^(eps^20)"


def _check_p(p: float):
    if not 2 < p <= 6:
        raise ValueError(f"p must lie in (2, 6] (got {p})")


def _ball_reducer(R: float, pointwise):
    """Reducer summing ``pointwise(slices)`` over the points of a slice inside ``B_R``."""

    def reduce(x3: float, x1: np.ndarray, x2: np.ndarray, slices: list[np.ndarray]) -> float:
        inside = x1[:, None] ** 2 + x2[None, :] ** 2 + x3 * x3 <= R * R
        if not np.any(inside):
            return 0.0
        spacing = x1[1] - x1[0]
        return compensated_sum(pointwise(slices)[inside]) * spacing**3

    return reduce


def restriction_ratio(f: FreqDensity, R: float, p: float = CRITICAL_P, ensemble: str = "") -> RestrictionReport:
    """
    Local restriction ratio ``int_{B_R} |Ef|^p / ||f||_p^p``.

    :param f: Density resolving caps at scale ``R``.
    :param R: Scale.
    :param p: Exponent in ``(2, 6]``.
    :param ensemble: Label of the input family, copied to the report.
    """
    _check_p(p)
    rhs = f.lp_norm(p) ** p
    if f.is_zero():
        return RestrictionReport(R, p, 0.0, 0.0, ensemble)
    lhs = reduce_slices([f], R, _ball_reducer(R, lambda s: np.abs(s[0]) ** p), ExtensionGrid())
    logger.debug(f"restriction at R={R}, p={p:.4f}: lhs={lhs:.6e} rhs={rhs:.6e}")
    return RestrictionReport(R, p, lhs, rhs, ensemble)


def _cell_pieces(f: FreqDensity, K: int) -> list[FreqDensity]:
    return [restrict_freq(f, tau).trimmed() for tau in cell_squares(K)]


def _stacked(slices: list[np.ndarray], K: int) -> np.ndarray:
    return np.stack([np.abs(s) for s in slices], axis=-1).reshape(slices[0].shape + (K, K))


def broad_restriction_ratio(f: FreqDensity, R: float, A: int = 2, K: int = 8, p: float = CRITICAL_P, ensemble: str = "") -> RestrictionReport:
    """
    Broad restriction ratio ``int_{B_R} |Br_A Ef|^p / (||f||_2^2 sup_theta ||f||_{L^2_avg(theta)}^(p-2))``.

    The supremum runs over the ``R^(-1/2)``-squares of ``[-1, 1]^2``; ``Br_A`` uses the ``K x K``
    cells of side ``2/K``. The report carries the effective ``K`` and ``A`` next to their
    couplings to ``R``.

    :raises ValueError: unless ``A >= 2``, ``K`` is a power of 2 and ``p`` lies in ``(2, 6]``.
    """
    _check_p(p)
    if A < 2:
        raise ValueError(f"A must be at least 2 (got {A})")
    if not is_power_of_two(K):
        raise ValueError(f"K must be a power of 2 (got {K})")
    parameters = {"A": A, "K": K, "A_coupling": A_COUPLING, "K_coupling": K_COUPLING}
    sup_avg = max(cap_avg_l2(f, theta) for theta in tile(Square((0.0, 0.0), 2.0), R**-0.5))
    rhs = f.mass() * sup_avg ** (p - 2)
    if f.is_zero():
        return RestrictionReport(R, p, 0.0, 0.0, ensemble, parameters=parameters)
    pieces = _cell_pieces(f, K)
    lhs = reduce_slices(pieces, R, _ball_reducer(R, lambda s: broad_values(_stacked(s, K), A) ** p), ExtensionGrid())
    return RestrictionReport(R, p, lhs, rhs, ensemble, parameters=parameters)


def bilinear_bound(f: FreqDensity, R: float, K: int = 8, p: float = CRITICAL_P) -> RatioReport:
    """
    Cross-check ``Br_2 Ef <= max |Ef_tau1 Ef_tau2|^(1/2)`` over separated pairs, integrated over ``B_R``.

    :returns: A report with ``lhs = int |Br_2 Ef|^p`` and ``rhs = int max |Ef_tau1 Ef_tau2|^(p/2)``.
    :raises InvariantViolation: if the integrated inequality fails.
    """
    _check_p(p)
    if f.is_zero():
        return RatioReport(0.0, 0.0, R, {"K": K, "p": p})
    pieces = _cell_pieces(f, K)
    lhs = reduce_slices(pieces, R, _ball_reducer(R, lambda s: separated_pairs(_stacked(s, K))[0] ** p))
    rhs = reduce_slices(pieces, R, _ball_reducer(R, lambda s: separated_pairs(_stacked(s, K))[1] ** p))
    if lhs > rhs * (1 + 1e-12):
        raise InvariantViolation(f"broad norm exceeds the bilinear bound ({lhs:.6e} > {rhs:.6e})")
    return RatioReport(lhs, rhs, R, {"K": K, "p": p})


def fit_restriction(reports: Sequence[RestrictionReport]) -> float:
    """
    Growth exponent of the largest ratio per scale, fitted in log2-log2 coordinates.

    :raises ValueError: with fewer than two scales or a vanishing maximum.
    """
    best: dict[float, float] = {}
    for report in reports:
        best[report.R] = max(best.get(report.R, 0.0), report.ratio)
    scales = sorted(best)
    return fit_exponent(scales, [best[R] for R in scales])
