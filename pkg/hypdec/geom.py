"""
Frequency-plane and 3-space geometry.

Squares, oriented rectangles and dyadic rectangles in the frequency plane, the transversality and
general position predicates, and the affine maps that preserve the hyperbolic paraboloid
``{(xi, eta, xi * eta)}``.
"""
import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from .classes.base import Validateable
from .classes.enums import DilationAxis
from .utils import is_power_of_two

__all__ = [
    "DEFAULT_BAND",
    "MEMBERSHIP_TOLERANCE",
    "Square",
    "PlaneRect",
    "DyadicRect",
    "AffineMap3",
    "smooth_step",
    "interval_bump",
    "is_transverse",
    "is_general_position",
    "partition",
    "tile",
    "strips",
    "split_long",
    "dyadic_cover",
    "hyperbolic_rescale",
    "nonisotropic_dilate",
    "tangent_normal",
    "tangent_intersection_direction",
    "canonical_rect_axis",
]

DEFAULT_BAND = (0.25, 4.0)
"""Numeric reading of "comparable to 1" used by the transversality and general position predicates."""
MEMBERSHIP_TOLERANCE = 1e-9
"""Shift applied to half-open membership tests so that grid points on an edge fall on one side only."""
_BOUNDING_BOX = 2.0
_EDGE_TOLERANCE = 1e-12

Point2 = tuple[float, float]


def _check_band(band: Sequence[float]) -> tuple[float, float]:
    lo, hi = float(band[0]), float(band[1])
    if not 0 <= lo <= hi:
        raise ValueError(f"band must satisfy 0 <= LO <= HI (got {lo}, {hi})")
    return lo, hi


def smooth_step(u: np.ndarray) -> np.ndarray:
    """
    C-infinity step rising from 0 at ``u <= -1/2`` to 1 at ``u >= 1/2``.

    Satisfies ``smooth_step(u) + smooth_step(-u) == 1``.
    """
    u = np.asarray(u, dtype=float)
    a = u + 0.5
    b = 0.5 - u
    with np.errstate(divide="ignore", over="ignore"):
        ea = np.where(a > 0, np.exp(-1 / np.where(a > 0, a, 1)), 0.0)
        eb = np.where(b > 0, np.exp(-1 / np.where(b > 0, b, 1)), 0.0)
    return ea / (ea + eb)


def interval_bump(x: np.ndarray, lo: float, hi: float, width: float, open_lo: bool = False, open_hi: bool = False) -> np.ndarray:
    """
    Smooth bump of an interval, one factor of a partition of unity.

    The bump equals 1 on ``[lo + width/2, hi - width/2]`` and vanishes outside
    ``[lo - width/2, hi + width/2]``. Bumps of adjacent intervals sharing an edge and a transition
    width sum to 1.

    :param x: Evaluation points.
    :param lo: Lower edge.
    :param hi: Upper edge.
    :param width: Transition width, at most ``hi - lo``.
    :param open_lo: If `True`, no transition at the lower edge (the edge lies on the domain boundary).
    :param open_hi: If `True`, no transition at the upper edge.
    :returns: Bump values in ``[0, 1]``.
    """
    x = np.asarray(x, dtype=float)
    rising = np.ones_like(x) if open_lo else smooth_step((x - lo) / width)
    falling = np.ones_like(x) if open_hi else 1 - smooth_step((x - hi) / width)
    return rising * falling


def _half_open(x: np.ndarray, lo: float, hi: float) -> np.ndarray:
    return (x >= lo - MEMBERSHIP_TOLERANCE) & (x < hi - MEMBERSHIP_TOLERANCE)


@dataclass(frozen=True)
class Square(Validateable):
    """
    Axis-parallel square in the frequency plane.

    Membership is half-open, ``[lo, hi)`` in each coordinate.
    """

    center: Point2
    side: float

    def coerce(self):
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        object.__setattr__(self, "side", float(self.side))

    def validate(self):
        if not self.side > 0 or not math.isfinite(self.side):
            raise ValueError(f"side must be positive (got {self.side})")
        for lo, hi in zip(self.lo, self.hi):
            if lo < -_BOUNDING_BOX - _EDGE_TOLERANCE or hi > _BOUNDING_BOX + _EDGE_TOLERANCE:
                raise ValueError(f"square must lie in [-2, 2]^2 (got center {self.center}, side {self.side})")

    @classmethod
    def from_bounds(cls, lo: Point2, side: float) -> "Square":
        return cls((lo[0] + side / 2, lo[1] + side / 2), side)

    @property
    def lo(self) -> Point2:
        return (self.center[0] - self.side / 2, self.center[1] - self.side / 2)

    @property
    def hi(self) -> Point2:
        return (self.center[0] + self.side / 2, self.center[1] + self.side / 2)

    @property
    def area(self) -> float:
        return self.side * self.side

    def scaled(self, factor: float) -> "Square":
        """Concentric square with side multiplied by ``factor`` (clipped to the bounding box)."""
        side = self.side * factor
        limit = 2 * min(_BOUNDING_BOX - abs(self.center[0]), _BOUNDING_BOX - abs(self.center[1]))
        return Square(self.center, min(side, limit))

    def contains(self, xi: np.ndarray, eta: np.ndarray) -> np.ndarray:
        return _half_open(np.asarray(xi), self.lo[0], self.hi[0]) & _half_open(np.asarray(eta), self.lo[1], self.hi[1])

    def contains_square(self, other: "Square") -> bool:
        return all(
            slo >= lo - _EDGE_TOLERANCE and shi <= hi + _EDGE_TOLERANCE
            for lo, hi, slo, shi in zip(self.lo, self.hi, other.lo, other.hi)
        )

    def intersects_domain(self) -> bool:
        """Check whether the square meets the open domain ``(-1, 1)^2``."""
        return all(lo < 1 and hi > -1 for lo, hi in zip(self.lo, self.hi))

    def bump(self, xi: np.ndarray, eta: np.ndarray) -> np.ndarray:
        """
        Smooth partition-of-unity bump, equal to 1 on the middle half and supported in 1.5 times the square.

        Edges on the boundary of ``[-1, 1]^2`` carry no transition, so bumps of a tiling of the
        domain sum to 1 on the whole domain.
        """
        width = self.side / 2
        (xlo, ylo), (xhi, yhi) = self.lo, self.hi
        bx = interval_bump(xi, xlo, xhi, width, xlo <= -1 + _EDGE_TOLERANCE, xhi >= 1 - _EDGE_TOLERANCE)
        by = interval_bump(eta, ylo, yhi, width, ylo <= -1 + _EDGE_TOLERANCE, yhi >= 1 - _EDGE_TOLERANCE)
        return bx * by


@dataclass(frozen=True)
class PlaneRect(Validateable):
    """
    Oriented rectangle in the frequency plane.

    ``half_lengths`` holds the half-lengths of the short and long sides; ``axis`` is the unit
    direction of the long side.
    """

    center: Point2
    half_lengths: tuple[float, float]
    axis: Point2

    def coerce(self):
        ax, ay = float(self.axis[0]), float(self.axis[1])
        norm = math.hypot(ax, ay)
        if norm == 0:
            raise ValueError("axis cannot be the zero vector")
        object.__setattr__(self, "axis", (ax / norm, ay / norm))
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        object.__setattr__(self, "half_lengths", (float(self.half_lengths[0]), float(self.half_lengths[1])))

    def validate(self):
        short, long = self.half_lengths
        if not 0 < short <= long * (1 + _EDGE_TOLERANCE):
            raise ValueError(f"half lengths must satisfy 0 < short <= long (got {short}, {long})")
        for x, y in self.corners:
            if max(abs(x), abs(y)) > _BOUNDING_BOX + _EDGE_TOLERANCE:
                raise ValueError(f"rectangle corners must lie in [-2, 2]^2 (got corner ({x}, {y}))")

    @property
    def normal(self) -> Point2:
        return (-self.axis[1], self.axis[0])

    @property
    def corners(self) -> list[Point2]:
        short, long = self.half_lengths
        (ax, ay), (nx, ny) = self.axis, self.normal
        cx, cy = self.center
        return [(cx + su * long * ax + sv * short * nx, cy + su * long * ay + sv * short * ny) for su in (-1, 1) for sv in (-1, 1)]

    @property
    def slope(self) -> float:
        """Slope of the long axis; infinite when the axis is vertical."""
        if self.axis[0] == 0:
            return math.inf
        return self.axis[1] / self.axis[0]

    def local_coords(self, xi: np.ndarray, eta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Coordinates along the long axis and along the normal, relative to the center."""
        dx = np.asarray(xi, dtype=float) - self.center[0]
        dy = np.asarray(eta, dtype=float) - self.center[1]
        return dx * self.axis[0] + dy * self.axis[1], dx * self.normal[0] + dy * self.normal[1]

    def contains(self, xi: np.ndarray, eta: np.ndarray) -> np.ndarray:
        u, v = self.local_coords(xi, eta)
        short, long = self.half_lengths
        return _half_open(u, -long, long) & _half_open(v, -short, short)

    def bump(self, xi: np.ndarray, eta: np.ndarray) -> np.ndarray:
        u, v = self.local_coords(xi, eta)
        short, long = self.half_lengths
        return interval_bump(u, -long, long, long) * interval_bump(v, -short, short, short)


@dataclass(frozen=True)
class DyadicRect(Validateable):
    """
    Dyadic rectangle ``[-1 + i 2^a, -1 + (i+1) 2^a) x [-1 + j 2^b, -1 + (j+1) 2^b)``.

    Tiles touching the upper domain edge are closed there, so ``[-1, 1]^2`` is covered exactly once per shape.
    When ``scale`` is given, the admissibility constraints at that scale are checked.
    """

    log_side_1: int
    log_side_2: int
    position: tuple[int, int]
    scale: float | None = None

    def validate(self):
        for log_side, index in zip((self.log_side_1, self.log_side_2), self.position):
            if log_side > 1:
                raise ValueError(f"dyadic side cannot exceed 2 (got 2^{log_side})")
            if not 0 <= index < 2 ** (1 - log_side):
                raise ValueError(f"position index out of range (got {index} for side 2^{log_side})")
        if self.scale is not None:
            if min(self.log_side_1, self.log_side_2) < -math.log2(self.scale) - _EDGE_TOLERANCE:
                raise ValueError(f"dyadic side below 1/R (got R={self.scale})")
            if self.log_side_1 + self.log_side_2 != -round(math.log2(self.scale)):
                raise ValueError(f"dyadic rectangle area must be 1/R (got R={self.scale})")

    @property
    def sides(self) -> Point2:
        return (2.0**self.log_side_1, 2.0**self.log_side_2)

    @property
    def lo(self) -> Point2:
        s1, s2 = self.sides
        return (-1 + self.position[0] * s1, -1 + self.position[1] * s2)

    @property
    def hi(self) -> Point2:
        s1, s2 = self.sides
        return (self.lo[0] + s1, self.lo[1] + s2)

    @property
    def center(self) -> Point2:
        return ((self.lo[0] + self.hi[0]) / 2, (self.lo[1] + self.hi[1]) / 2)

    def contains(self, xi: np.ndarray, eta: np.ndarray) -> np.ndarray:
        inside = np.ones(np.broadcast(np.asarray(xi), np.asarray(eta)).shape, dtype=bool)
        for coord, lo, hi in zip((np.asarray(xi), np.asarray(eta)), self.lo, self.hi):
            upper = coord < hi if hi < 1 else coord <= hi
            inside &= (coord >= lo) & upper
        return inside

    def bump(self, xi: np.ndarray, eta: np.ndarray) -> np.ndarray:
        (xlo, ylo), (xhi, yhi) = self.lo, self.hi
        s1, s2 = self.sides
        bx = interval_bump(xi, xlo, xhi, s1 / 2, xlo <= -1, xhi >= 1)
        by = interval_bump(eta, ylo, yhi, s2 / 2, ylo <= -1, yhi >= 1)
        return bx * by


@dataclass(frozen=True, eq=False)
class AffineMap3:
    """Affine map ``x -> matrix @ x + translation`` of 3-space."""

    matrix: np.ndarray
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=float)
        translation = np.array(self.translation, dtype=float)
        if matrix.shape != (3, 3) or translation.shape != (3,):
            raise ValueError(f"expected a 3x3 matrix and a 3-vector (got {matrix.shape} and {translation.shape})")
        if abs(np.linalg.det(matrix)) < 1e-300:
            raise ValueError("affine map must be invertible")
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "translation", translation)

    def __call__(self, points: np.ndarray) -> np.ndarray:
        """Apply the map to an array of points of shape ``(..., 3)``."""
        return np.asarray(points, dtype=float) @ self.matrix.T + self.translation

    def inverse(self) -> "AffineMap3":
        inv = np.linalg.inv(self.matrix)
        return AffineMap3(inv, -inv @ self.translation)

    def compose(self, other: "AffineMap3") -> "AffineMap3":
        """The map ``self o other``."""
        return AffineMap3(self.matrix @ other.matrix, self.matrix @ other.translation + self.translation)


def is_transverse(tau1: Square, tau2: Square, band: Sequence[float] = DEFAULT_BAND) -> bool:
    """
    Check if two squares are transverse.

    Both the ``xi`` and the ``eta`` distance between the centers must lie in ``band``.

    :param tau1: First square.
    :param tau2: Second square.
    :param band: Interval ``(LO, HI)`` interpreting "comparable to 1".
    :returns: `True` if the pair is transverse.
    """
    lo, hi = _check_band(band)
    for tau in (tau1, tau2):
        if not tau.side > 0:
            raise ValueError(f"degenerate square (got side {tau.side})")
    gap_xi = abs(tau1.center[0] - tau2.center[0])
    gap_eta = abs(tau1.center[1] - tau2.center[1])
    return lo <= gap_xi <= hi and lo <= gap_eta <= hi


def is_general_position(
    p1: Square | PlaneRect, p2: Square | PlaneRect | None = None, band: Sequence[float] = DEFAULT_BAND
) -> bool:
    """
    Check if the line joining two regions has slope of absolute value comparable to 1.

    With a single :class:`PlaneRect`, the slope of its long axis is tested instead. A vertical
    line has infinite slope, which is never inside the band.
    """
    lo, hi = _check_band(band)
    if p2 is None:
        if not isinstance(p1, PlaneRect):
            raise ValueError("a single region must be a PlaneRect")
        slope = abs(p1.slope)
    else:
        dx = p2.center[0] - p1.center[0]
        dy = p2.center[1] - p1.center[1]
        if dx == 0:
            return False
        slope = abs(dy / dx)
    return lo <= slope <= hi


def _grid_count(side: float, delta: float) -> int:
    if not delta > 0:
        raise ValueError(f"delta must be positive (got {delta})")
    if delta > side * (1 + _EDGE_TOLERANCE):
        raise ValueError(f"delta cannot exceed the side (got delta={delta}, side={side})")
    return max(1, math.ceil(side / delta - _EDGE_TOLERANCE))


def partition(tau: Square, delta: float) -> list[Square]:
    """
    Cover a square by evenly placed axis-parallel squares of side ``delta``.

    The cover has ``ceil(side / delta) ** 2`` members and is an exact tiling when ``delta``
    divides the side.

    :param tau: Square to cover.
    :param delta: Side of the covering squares.
    :returns: Covering squares, ordered by ``xi`` index then ``eta`` index.
    """
    count = _grid_count(tau.side, delta)
    if count == 1:
        return [Square(tau.center, delta)]
    (xlo, ylo), (xhi, yhi) = tau.lo, tau.hi
    xs = np.linspace(xlo + delta / 2, xhi - delta / 2, count)
    ys = np.linspace(ylo + delta / 2, yhi - delta / 2, count)
    return [Square((x, y), delta) for x in xs for y in ys]


def tile(tau: Square, delta: float) -> list[Square]:
    """
    Tile a square exactly by ``ceil(side / delta) ** 2`` equal squares of side at most ``delta``.

    :param tau: Square to tile.
    :param delta: Upper bound on the side of the tiles.
    :returns: Tiles, ordered by ``xi`` index then ``eta`` index.
    """
    count = _grid_count(tau.side, delta)
    side = tau.side / count
    (xlo, ylo) = tau.lo
    return [Square.from_bounds((xlo + i * side, ylo + j * side), side) for i in range(count) for j in range(count)]


def strips(alpha: Square, axis: Point2, width: float) -> list[PlaneRect]:
    """
    Partition a square into parallel strips whose long side points along ``axis``.

    The strips tile the projection of ``alpha`` onto the normal of ``axis`` exactly, so every
    point of ``alpha`` lies in exactly one strip. Their number is ``ceil(side / width)`` whatever
    the direction, so a width equal to the side leaves ``alpha`` whole.

    :param alpha: Square to partition.
    :param axis: Direction of the long sides.
    :param width: Strip width measured against the side of ``alpha``.
    :returns: Strips ordered along the normal direction.
    """
    ax, ay = axis
    norm = math.hypot(ax, ay)
    ax, ay = ax / norm, ay / norm
    nx, ny = -ay, ax
    half_extent = (abs(nx) + abs(ny)) * alpha.side / 2
    half_long = (abs(ax) + abs(ay)) * alpha.side / 2
    count = _grid_count(alpha.side, width)
    step = 2 * half_extent / count
    rects = []
    for k in range(count):
        offset = -half_extent + (k + 0.5) * step
        center = (alpha.center[0] + offset * nx, alpha.center[1] + offset * ny)
        rects.append(PlaneRect(center, (step / 2, max(half_long, step / 2)), (ax, ay)))
    return rects


def split_long(rect: PlaneRect, pieces: int) -> list[PlaneRect]:
    """
    Split a rectangle into ``pieces`` congruent rectangles along its long axis.

    :param rect: Rectangle to split.
    :param pieces: Number of pieces.
    :returns: Pieces ordered along the axis.
    """
    if pieces < 1:
        raise ValueError(f"pieces must be positive (got {pieces})")
    short, long = rect.half_lengths
    piece_half = long / pieces
    (ax, ay), (nx, ny) = rect.axis, rect.normal
    result = []
    for k in range(pieces):
        offset = -long + (2 * k + 1) * piece_half
        center = (rect.center[0] + offset * ax, rect.center[1] + offset * ay)
        if piece_half >= short:
            result.append(PlaneRect(center, (short, piece_half), (ax, ay)))
        else:
            result.append(PlaneRect(center, (piece_half, short), (nx, ny)))
    return result


def dyadic_cover(R: float) -> list[DyadicRect]:
    """
    Enumerate the dyadic rectangles of area ``1/R`` with sides in ``[1/R, 2]`` inside ``[-1, 1]^2``.

    There are ``log2(R) + 1`` shapes, each tiling the square with ``4R`` rectangles.

    :param R: Scale, a power of 2 with ``R >= 4``.
    :returns: All rectangles, grouped by shape.
    """
    if not is_power_of_two(R) or R < 4:
        raise ValueError(f"R must be a power of 2 and at least 4 (got {R})")
    m = round(math.log2(R))
    cover = []
    for a in range(-m, 1):
        b = -m - a
        for i in range(2 ** (1 - a)):
            for j in range(2 ** (1 - b)):
                cover.append(DyadicRect(a, b, (i, j), R))
    return cover


def hyperbolic_rescale(c1: float, c2: float, d: float) -> AffineMap3:
    """
    Affine map of frequency space sending the paraboloid to itself and the square of side ``2d`` about ``(c1, c2)`` onto ``[-1, 1]^2``.

    ``(xi, eta, gamma) -> ((xi - c1)/d, (eta - c2)/d, (gamma - c1 eta - c2 xi + c1 c2)/d^2)``
    """
    if not d > 0:
        raise ValueError(f"d must be positive (got {d})")
    matrix = [
        [1 / d, 0, 0],
        [0, 1 / d, 0],
        [-c2 / d**2, -c1 / d**2, 1 / d**2],
    ]
    return AffineMap3(matrix, [-c1 / d, -c2 / d, c1 * c2 / d**2])


def nonisotropic_dilate(axis: DilationAxis, K: float) -> AffineMap3:
    """Dilation by ``2K`` in one frequency direction and in ``gamma``; preserves the paraboloid."""
    if K < 1:
        raise ValueError(f"K must be at least 1 (got {K})")
    match axis:
        case DilationAxis.HORIZONTAL:
            return AffineMap3(np.diag([1.0, 2 * K, 2 * K]))
        case DilationAxis.VERTICAL:
            return AffineMap3(np.diag([2 * K, 1.0, 2 * K]))
    raise ValueError(f"unknown dilation axis (got {axis})")


def tangent_normal(xi: float, eta: float) -> np.ndarray:
    """Normal ``(eta, xi, -1)`` of the paraboloid at ``(xi, eta, xi * eta)``."""
    return np.array([eta, xi, -1.0])


def tangent_intersection_direction(p1: Point2, p2: Point2) -> np.ndarray:
    """
    Direction of the line where the tangent planes at ``p1`` and ``p2`` meet.

    :returns: ``(xi2 - xi1, eta1 - eta2, eta1 xi2 - eta2 xi1)``.
    """
    (xi1, eta1), (xi2, eta2) = p1, p2
    if xi1 == xi2 and eta1 == eta2:
        raise ValueError(f"points must be distinct (got {p1} twice)")
    return np.array([xi2 - xi1, eta1 - eta2, eta1 * xi2 - eta2 * xi1])


def canonical_rect_axis(c1: Point2, c2: Point2) -> Point2:
    """
    Long-side direction of rectangles adapted to a pair of regions centered at ``c1`` and ``c2``.

    This is the horizontal projection of :func:`tangent_intersection_direction`; its slope is
    minus the slope of the joining line.
    """
    direction = tangent_intersection_direction(c1, c2)[:2]
    norm = float(np.hypot(*direction))
    return (float(direction[0]) / norm, float(direction[1]) / norm)
