"""
Decoupling-type estimators.

Every estimator returns a :class:`~hypdec.classes.reports.RatioReport` holding both sides of an
inequality ``lhs <= C rhs``; the maximum ratio over an input ensemble is a lower bound for the
constant. ``L^4`` and bilinear ``L^2`` integrals over ``R^3`` are replaced by integrals over the
periodized box times ``[-R, R]`` (torus mode) or against the ``w_{B_R}`` weight (weighted mode);
integrals over balls are Riemann sums over a lattice of spacing 1/2.
"""
import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
import scipy.fft
from numpy.random import Generator, Philox, SeedSequence

from .classes.base import PreconditionError
from .classes.enums import EnsembleKind, NarrowBroadLabel, NormMode, RestrictMode, SquareFunctionMode
from .classes.reports import RatioReport
from .field import (
    X3_STEP,
    BallUnion,
    ExtensionGrid,
    FreqDensity,
    FreqRegion,
    SpatialField,
    extend,
    extend_at,
    extend_slice,
    grid_size,
    integrate,
    restrict_freq,
    torus_counts,
)
from .geom import (
    DEFAULT_BAND,
    PlaneRect,
    Square,
    canonical_rect_axis,
    dyadic_cover,
    is_general_position,
    is_transverse,
    split_long,
    strips,
    tile,
)
from .wavepacket import WavePacketDecomp, max_tube_multiplicity

__all__ = [
    "QUADRATURE_STEP",
    "DEFAULT_ANGLE_BAND",
    "Ensemble",
    "CurveDensity",
    "NarrowBroadResult",
    "bilinear_l2_ratio",
    "refined_ratio",
    "linear_dyadic_ratio",
    "additive_quadruples",
    "dirichlet_ratio",
    "segment_density",
    "bilinear_restriction_2d",
    "square_function_ratio",
    "g_function",
    "classify_narrow_broad",
    "generate",
]

logger = logging.getLogger(__name__)

QUADRATURE_STEP = 0.5
"""Lattice spacing of Riemann sums over balls."""
DEFAULT_ANGLE_BAND = (0.25, math.pi / 2)
"""Admissible angles (radians) between the normals of two curves for bilinear restriction."""


def _check_support(f: FreqDensity, region: FreqRegion, name: str):
    xi, eta = f.mesh()
    if np.any(f.samples[~region.contains(xi, eta)]):
        raise PreconditionError(f"{name} is not supported in its frequency region")


def _labels(f: FreqDensity, regions: Sequence[FreqRegion]) -> np.ndarray:
    """Index of the first region containing each sample, -1 outside all of them."""
    xi, eta = f.mesh()
    labels = np.full(f.samples.shape, -1, dtype=int)
    for k, region in enumerate(regions):
        labels[(labels < 0) & region.contains(xi, eta)] = k
    return labels


def _pieces_at(f: FreqDensity, regions: Sequence[FreqRegion], points: np.ndarray) -> np.ndarray:
    if not regions:
        return np.zeros((0, points.shape[0]), dtype=np.complex128)
    return extend_at(f, points, _labels(f, regions), len(regions))


def _l4_fourth(f: FreqDensity, R: float, mode: NormMode, x3_step: float) -> float:
    if f.is_zero():
        return 0.0
    return integrate([f], lambda F: np.abs(F) ** 4, R, mode, multiplicity=4, x3_step=x3_step)


def _piece_l4(f: FreqDensity, regions: Sequence[FreqRegion], R: float, mode: NormMode, x3_step: float) -> list[float]:
    """``int |Ef_omega|^4`` for the sharp restriction of ``f`` to each region."""
    values = []
    for region in regions:
        piece = restrict_freq(f, region, RestrictMode.SHARP)
        values.append(_l4_fourth(piece.trimmed(), R, mode, x3_step))
    return values


def bilinear_l2_ratio(
    f1: FreqDensity,
    f2: FreqDensity,
    tau1: Square,
    tau2: Square,
    R: float,
    band: Sequence[float] = DEFAULT_BAND,
    mode: NormMode = NormMode.TORUS,
    x3_step: float = X3_STEP,
) -> RatioReport:
    """
    Bilinear l2 decoupling ratio.

    ``lhs = int |Ef1 Ef2|^2`` and ``rhs = prod_j sum_theta ||Ef_theta||_4^2`` where ``theta``
    runs over the tiles of ``tau_j`` of side at most ``R^(-1/2)``.

    :param f1: Density supported in ``tau1``.
    :param f2: Density supported in ``tau2``.
    :param tau1: First square.
    :param tau2: Second square, transverse to the first.
    :param R: Scale.
    :param band: Transversality band.
    :param mode: Torus or weighted integration.
    :param x3_step: Spacing of the ``x3`` midpoint rule.
    :raises PreconditionError: if the squares are not transverse or a density leaks out of its square.
    """
    if not is_transverse(tau1, tau2, band):
        raise PreconditionError(f"squares centered at {tau1.center} and {tau2.center} are not transverse")
    _check_support(f1, tau1, "f1")
    _check_support(f2, tau2, "f2")
    parameters = {"delta": tau1.side, "mode": str(mode)}
    if f1.is_zero() or f2.is_zero():
        return RatioReport(0.0, 0.0, R, parameters)
    lhs = integrate([f1, f2], lambda F1, F2: np.abs(F1 * F2) ** 2, R, mode, multiplicity=2, x3_step=x3_step)
    rhs = 1.0
    for f, tau in ((f1, tau1), (f2, tau2)):
        fourth = _piece_l4(f, tile(tau, R**-0.5), R, mode, x3_step)
        rhs *= math.fsum(math.sqrt(v) for v in fourth)
    logger.debug(f"bilinear l2 at R={R}: lhs={lhs:.6e} rhs={rhs:.6e}")
    return RatioReport(lhs, rhs, R, parameters)


def refined_ratio(d1: WavePacketDecomp, d2: WavePacketDecomp, X: BallUnion, R: float, x3_step: float = X3_STEP) -> RatioReport:
    """
    Refined bilinear decoupling ratio.

    ``lhs = int_X |Ef1 Ef2|^2`` with ``f_j`` the sum of the packets of ``d_j``, and
    ``rhs = (M1 M2)^(1/2) prod_j (sum_T ||Ef_T||_4^4)^(1/2)`` where ``M_j`` is the largest number
    of tubes of ``d_j`` meeting one ball of ``X`` (at least 1).

    :param d1: Packets of the first function.
    :param d2: Packets of the second function.
    :param X: Pairwise disjoint balls of radius ``R^(1/2)``.
    :param R: Scale.
    :raises PreconditionError: if the balls of ``X`` overlap.
    """
    if not X.is_disjoint():
        raise PreconditionError("the balls of X overlap")
    M1 = max(1, max_tube_multiplicity(d1.tubes, X))
    M2 = max(1, max_tube_multiplicity(d2.tubes, X))
    parameters = {"M1": M1, "M2": M2, "balls": X.centers.shape[0], "packets1": len(d1.packets), "packets2": len(d2.packets)}
    if X.is_empty() or not d1.packets or not d2.packets:
        return RatioReport(0.0, 0.0, R, parameters)
    points = X.grid_points(QUADRATURE_STEP)
    F1 = extend_at(d1.reconstruct(), points)
    F2 = extend_at(d2.reconstruct(), points)
    lhs = math.fsum(np.abs(F1 * F2) ** 2) * QUADRATURE_STEP**3
    rhs = math.sqrt(M1 * M2)
    for d in (d1, d2):
        rhs *= math.sqrt(math.fsum(_l4_fourth(p.density, R, NormMode.TORUS, x3_step) for p in d.packets))
    logger.debug(f"refined at R={R}: M=({M1}, {M2}) lhs={lhs:.6e} rhs={rhs:.6e}")
    return RatioReport(lhs, rhs, R, parameters)


def linear_dyadic_ratio(f: FreqDensity, R: float, mode: NormMode = NormMode.TORUS, x3_step: float = X3_STEP) -> RatioReport:
    """
    Linear decoupling ratio over all dyadic rectangles of area ``1/R``.

    ``lhs = ||Ef||_4`` and ``rhs = (sum_omega ||Ef_omega||_4^2)^(1/2)``, the norms of the inequality
    itself. Their fourth powers are kept in the parameters as ``lhs4`` and ``rhs4``. The companion
    report uses the ``R^(-1/2)``-squares of ``[-1, 1]^2`` instead of the rectangles.

    :param f: Density on ``[-1, 1]^2``.
    :param R: Scale, a power of 2.
    """
    lhs = _l4_fourth(f, R, mode, x3_step)
    rect = _piece_l4(f, dyadic_cover(R), R, mode, x3_step)
    squares = _piece_l4(f, tile(Square((0.0, 0.0), 2.0), R**-0.5), R, mode, x3_step)
    rect_rhs = math.fsum(math.sqrt(v) for v in rect) ** 2
    square_rhs = math.fsum(math.sqrt(v) for v in squares) ** 2
    companion = RatioReport(lhs**0.25, square_rhs**0.25, R, {"pieces": "squares", "lhs4": lhs, "rhs4": square_rhs})
    parameters = {"pieces": "dyadic", "mode": str(mode), "lhs4": lhs, "rhs4": rect_rhs}
    return RatioReport(lhs**0.25, rect_rhs**0.25, R, parameters, companion)


def additive_quadruples(N: int) -> int:
    """Number of ``(a, b, c, d)`` in ``[0, N)^4`` with ``a + b = c + d``, equal to ``(2 N^3 + N) / 3``."""
    if N <= 0:
        return 0
    representations = np.convolve(np.ones(N, dtype=np.int64), np.ones(N, dtype=np.int64))
    return int(np.sum(representations**2))


def dirichlet_ratio(caps: int, per_cap: int) -> float:
    """
    Square-only decoupling ratio of a constant density on one row of the grid.

    A row of ``caps * per_cap`` samples has no curvature, so on the torus ``||Ef||_4^4`` is
    proportional to the quadruple count of its length; each cap contributes the count of its own
    length.
    """
    return additive_quadruples(caps * per_cap) / (caps**2 * additive_quadruples(per_cap))


@dataclass(frozen=True, eq=False)
class CurveDensity:
    """
    Density on the ``delta``-neighbourhood of a straight segment of the plane.

    The planar transform is ``Ef`` restricted to ``x3 = 0``.
    """

    density: FreqDensity
    point: tuple[float, float]
    direction: tuple[float, float]
    length: float
    delta: float

    @property
    def normal(self) -> np.ndarray:
        return np.array([-self.direction[1], self.direction[0]])


def segment_density(
    point: Sequence[float],
    direction: Sequence[float],
    length: float,
    delta: float,
    n: int,
    rng: Generator | None = None,
) -> CurveDensity:
    """
    Density on the ``delta``-neighbourhood of the segment ``point + t direction``, ``|t| <= length / 2``.

    Samples get independent uniform phases when ``rng`` is given and are 1 otherwise.
    """
    u = np.asarray(direction, dtype=float)
    u = u / np.linalg.norm(u)
    f = FreqDensity.zeros(n)
    xi, eta = f.mesh()
    rel = np.stack([xi - point[0], eta - point[1]], axis=-1)
    t = np.clip(rel @ u, -length / 2, length / 2)
    distance = np.linalg.norm(rel - t[..., None] * u, axis=-1)
    mask = distance <= delta
    values = np.ones(mask.shape, dtype=np.complex128)
    if rng is not None:
        values = np.exp(2j * math.pi * rng.random(mask.shape))
    density = f.with_samples(np.where(mask, values, 0))
    return CurveDensity(density, (float(point[0]), float(point[1])), (float(u[0]), float(u[1])), length, delta)


def _normal_angle(c1: CurveDensity, c2: CurveDensity) -> float:
    cosine = abs(float(np.dot(c1.normal, c2.normal)))
    return math.acos(min(1.0, cosine))


def _square_pieces(f: FreqDensity, cells: int, side: float) -> list[FreqDensity]:
    """Nonzero pieces of ``f`` on the squares of a ``cells x cells`` grid tiling ``[-1, 1]^2``."""
    trimmed = f.trimmed()
    xi, eta = trimmed.mesh()
    i = np.clip(np.floor((xi + 1) / side).astype(int), 0, cells - 1)
    j = np.clip(np.floor((eta + 1) / side).astype(int), 0, cells - 1)
    labels = np.where(trimmed.samples != 0, i * cells + j, -1)
    return [trimmed.with_samples(np.where(labels == label, trimmed.samples, 0)).trimmed() for label in np.unique(labels[labels >= 0])]


def bilinear_restriction_2d(c1: CurveDensity, c2: CurveDensity, angle_band: Sequence[float] = DEFAULT_ANGLE_BAND) -> RatioReport:
    """
    Planar bilinear restriction ratio.

    ``lhs = int |F1 F2|^2`` and ``rhs = sum_{s1, s2} int |P_s1 F1 P_s2 F2|^2`` over the periodized
    plane, where ``s`` runs over the ``delta``-squares of a grid tiling ``[-1, 1]^2``. Both integrals
    are exact: the right side equals ``int S1 S2`` with ``S_j = sum_s |P_s F_j|^2``, whose frequencies
    lie within ``2 delta`` of the origin.

    :raises PreconditionError: if the angle between the normals is outside ``angle_band``.
    """
    angle = _normal_angle(c1, c2)
    if not angle_band[0] <= angle <= angle_band[1]:
        raise PreconditionError(f"normals are not transverse (angle {angle:.3f} outside {tuple(angle_band)})")
    f1, f2 = c1.density, c2.density
    delta = c1.delta
    parameters = {"delta": delta, "angle": angle}
    if f1.is_zero() or f2.is_zero():
        return RatioReport(0.0, 0.0, 1.0, parameters)
    period = f1.period
    counts = torus_counts([f1, f2], 2)
    F1 = extend_slice(f1, 0.0, counts)
    F2 = extend_slice(f2, 0.0, counts)
    lhs = math.fsum((np.abs(F1 * F2) ** 2).ravel()) * (period / counts[0]) * (period / counts[1])

    cells = math.ceil(2 / delta - 1e-12)
    side = 2 / cells
    pieces = [_square_pieces(f, cells, side) for f in (f1, f2)]
    span = max(max(w[0][1] - w[0][0], w[1][1] - w[1][0]) for group in pieces for w in (p.support_window() for p in group))
    count = scipy.fft.next_fast_len(4 * span + 1)
    sums = []
    for group in pieces:
        total = np.zeros((count, count))
        for piece in group:
            total += np.abs(extend_slice(piece, 0.0, (count, count))) ** 2
        sums.append(total)
    rhs = math.fsum((sums[0] * sums[1]).ravel()) * (period / count) ** 2
    return RatioReport(lhs, rhs, 1.0, parameters | {"squares": len(pieces[0]) * len(pieces[1])})


def _check_pair(alpha1: Square, alpha2: Square, R: float, K2: float, band: Sequence[float]) -> float:
    """Check the general position regime ``d R^(1/2) r K2 >= 1`` and return ``d``."""
    if not is_general_position(alpha1, alpha2, band):
        raise PreconditionError(f"squares centered at {alpha1.center} and {alpha2.center} are not in general position")
    d = math.dist(alpha1.center, alpha2.center)
    if d * math.sqrt(R) * alpha1.side * K2 < 1:
        raise PreconditionError(f"d R^(1/2) r K2 = {d * math.sqrt(R) * alpha1.side * K2:.3g} is below 1")
    return d


def _omegas(alpha: Square, axis: tuple[float, float], width: float) -> list[PlaneRect]:
    return strips(alpha, axis, width)


def square_function_ratio(
    f1: FreqDensity,
    f2: FreqDensity,
    alpha1: Square,
    alpha2: Square,
    Q: BallUnion,
    R: float,
    mode: SquareFunctionMode = SquareFunctionMode.CAPS,
    K2: float = 2.0,
    band: Sequence[float] = DEFAULT_BAND,
) -> RatioReport:
    """
    Reverse square function estimate on a ball, in both directions.

    ``lhs = int_Q |Ef_alpha1 Ef_alpha2|^2`` and ``rhs = int_Q sum |Ef_omega1|^2 sum |Ef_omega2|^2``.
    The rectangles ``omega`` are parallel strips of ``alpha_j`` along the direction of the line
    where the tangent planes at the two centers meet; their width is ``r / K2`` in caps mode and
    ``R^(-1/2)`` in planes mode. The report's ``reverse_ratio`` is the recoupling direction.

    :raises PreconditionError: if the pair is not in general position or, in caps mode,
        ``d R^(1/2) r K2 < 1``.
    """
    if mode == SquareFunctionMode.CAPS:
        _check_pair(alpha1, alpha2, R, K2, band)
        width = alpha1.side / K2
    else:
        if not is_general_position(alpha1, alpha2, band):
            raise PreconditionError(f"squares centered at {alpha1.center} and {alpha2.center} are not in general position")
        width = min(alpha1.side, R**-0.5)
    axis = canonical_rect_axis(alpha1.center, alpha2.center)
    points = Q.grid_points(QUADRATURE_STEP)
    parameters = {"mode": str(mode), "K2": K2, "r": alpha1.side, "width": width}
    sides = []
    for f, alpha in ((f1, alpha1), (f2, alpha2)):
        _check_support(f, alpha, "density")
        omegas = _omegas(alpha, axis, width)
        sides.append(_pieces_at(f, omegas, points))
    lhs = math.fsum(np.abs(sides[0].sum(axis=0) * sides[1].sum(axis=0)) ** 2) * QUADRATURE_STEP**3
    square1 = np.sum(np.abs(sides[0]) ** 2, axis=0)
    square2 = np.sum(np.abs(sides[1]) ** 2, axis=0)
    rhs = math.fsum(square1 * square2) * QUADRATURE_STEP**3
    parameters["omegas"] = sides[0].shape[0] + sides[1].shape[0]
    return RatioReport(lhs, rhs, R, parameters)


def g_function(f: FreqDensity, omega: PlaneRect, K1: int, R: float, grid: ExtensionGrid | None = None) -> SpatialField:
    """
    The function ``g_omega = (sum_i |Ef_{s_i} Ef_{s_{i+2}}|)^(1/2)``.

    ``omega`` is split into ``K1`` congruent pieces ``s_i`` along its long axis; only the almost
    adjacent pairs, whose centers are two pieces apart, enter the sum.

    :raises ValueError: if ``K1 < 3``.
    """
    if K1 < 3:
        raise ValueError(f"K1 must be at least 3 (got {K1})")
    pieces = [extend(restrict_freq(f, s), R, grid) for s in split_long(omega, K1)]
    total = np.zeros(pieces[0].samples.shape)
    for i in range(K1 - 2):
        total += np.abs(pieces[i].samples * pieces[i + 2].samples)
    return pieces[0].with_samples(np.sqrt(total))


def _g_squared_at(f: FreqDensity, omegas: Sequence[PlaneRect], K1: int, points: np.ndarray) -> np.ndarray:
    """``g_omega^2`` at the points for each rectangle, shape ``(len(omegas), P)``."""
    pieces = [s for omega in omegas for s in split_long(omega, K1)]
    values = _pieces_at(f, pieces, points).reshape(len(omegas), K1, -1)
    return np.sum(np.abs(values[:, :-2] * values[:, 2:]), axis=1)


@dataclass(frozen=True)
class NarrowBroadResult:
    """Label of a pair of squares on a ball together with both terms of the dichotomy."""

    label: NarrowBroadLabel
    narrow_term: float | None = None
    broad_term: float | None = None
    parameters: dict = field(default_factory=dict)


def classify_narrow_broad(
    f1: FreqDensity,
    f2: FreqDensity,
    alpha1: Square,
    alpha2: Square,
    Q: BallUnion,
    K1: int,
    K2: float,
    R: float,
    k1_power: float = 2.0,
    band: Sequence[float] = DEFAULT_BAND,
) -> NarrowBroadResult:
    """
    Narrow/broad label of a pair of ``r``-squares relative to a ball.

    The narrow term is ``int_Q sum_beta1 |Ef_beta1|^2 sum_beta2 |Ef_beta2|^2`` over the tiles
    ``beta`` of side ``r / K1``. The broad term is ``K1^k1_power sum_{omega1, omega2} int_Q |g_omega1 g_omega2|^2``
    over the ``(r / K2, r)`` rectangles of the pair. Pairs outside the regime
    ``d R^(1/2) r K2 >= 1`` are left unlabeled.
    """
    try:
        _check_pair(alpha1, alpha2, R, K2, band)
    except PreconditionError as e:
        logger.debug(f"pair left unlabeled: {e}")
        return NarrowBroadResult(NarrowBroadLabel.UNLABELED)
    if K1 < 3:
        raise ValueError(f"K1 must be at least 3 (got {K1})")
    r = alpha1.side
    points = Q.grid_points(QUADRATURE_STEP)
    axis = canonical_rect_axis(alpha1.center, alpha2.center)
    squares = []
    gs = []
    for f, alpha in ((f1, alpha1), (f2, alpha2)):
        betas = tile(alpha, r / K1)
        squares.append(np.sum(np.abs(_pieces_at(f, betas, points)) ** 2, axis=0))
        gs.append(_g_squared_at(f, _omegas(alpha, axis, r / K2), K1, points))
    narrow = math.fsum(squares[0] * squares[1]) * QUADRATURE_STEP**3
    broad = K1**k1_power * math.fsum((gs[0].sum(axis=0) * gs[1].sum(axis=0))) * QUADRATURE_STEP**3
    label = NarrowBroadLabel.NARROW if narrow >= broad else NarrowBroadLabel.BROAD
    return NarrowBroadResult(label, narrow, broad, {"K1": K1, "K2": K2, "r": r, "k1_power": k1_power})


@dataclass(frozen=True)
class Ensemble:
    """A family of ``count`` inputs of one kind, reproducible from ``seed``."""

    kind: EnsembleKind
    seed: int = 0
    count: int = 1

    def __post_init__(self):
        if self.count < 0:
            raise ValueError(f"count must be nonnegative (got {self.count})")
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer (got {self.seed})")


def _one_input(kind: EnsembleKind, R: float, target: FreqRegion, rng: Generator, n: int) -> FreqDensity:
    f = FreqDensity.zeros(n)
    xi, eta = f.mesh()
    inside = target.contains(xi, eta)
    match kind:
        case EnsembleKind.RANDOM_PHASE:
            keys = np.floor(np.stack([xi[inside], eta[inside]], axis=-1) * R).astype(np.int64)
            occupied, index = np.unique(keys, axis=0, return_inverse=True)
            values = np.zeros(inside.shape, dtype=np.complex128)
            values[inside] = np.exp(2j * math.pi * rng.random(occupied.shape[0]))[index.reshape(-1)]
        case EnsembleKind.FOCUSING:
            values = np.ones(inside.shape)
        case EnsembleKind.LINE_CONCENTRATED:
            center_eta = target.center[1]
            row = int(np.argmin(np.abs(f.eta_axis - center_eta)))
            values = np.zeros(inside.shape)
            values[:, row] = 1.0
        case EnsembleKind.BUSH:
            caps = tile(Square((0.0, 0.0), 2.0), R**-0.5)
            count = round(math.sqrt(len(caps)))
            side = 2 / count
            i = np.clip(np.floor((xi + 1) / side).astype(int), 0, count - 1)
            j = np.clip(np.floor((eta + 1) / side).astype(int), 0, count - 1)
            phases = np.exp(2j * math.pi * rng.random((count, count)))
            values = phases[i, j]
        case EnsembleKind.SINGLE_CAP:
            cap = next(c for c in tile(Square((0.0, 0.0), 2.0), R**-0.5) if c.contains(*target.center))
            values = cap.contains(xi, eta).astype(float)
        case _:
            raise ValueError(f"unknown ensemble kind (got {kind})")
    return f.with_samples(np.where(inside, values, 0))


def generate(ensemble: Ensemble, R: float, target: FreqRegion, rng: Generator | None = None, n: int | None = None) -> list[FreqDensity]:
    """
    Draw the inputs of an ensemble supported in a target region.

    * random phase: independent uniform phases on the cells of side ``1/R``;
    * focusing: the constant 1, maximally interfering at the origin;
    * line concentrated: the grid row nearest the target's center, needing a grid with spacing at most ``1/R``;
    * bush: a random constant phase on each ``R^(-1/2)`` cap, so every packet passes through the origin;
    * single cap: the constant 1 on the ``R^(-1/2)`` cap containing the target's center.

    :param ensemble: Kind, seed and count.
    :param R: Scale.
    :param target: Support region.
    :param rng: Random generator; seeded from the ensemble by default.
    :param n: Frequency grid size; :func:`~hypdec.field.grid_size` by default.
    :returns: ``ensemble.count`` densities, identical for identical generators.
    """
    if rng is None:
        rng = Generator(Philox(SeedSequence(ensemble.seed)))
    if n is None:
        n = grid_size(R, fine=ensemble.kind == EnsembleKind.LINE_CONCENTRATED)
    return [_one_input(ensemble.kind, R, target, rng, n) for _ in range(ensemble.count)]
