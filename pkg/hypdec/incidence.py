"""
Direction-separated line families in the unit ball, shadings and their incidence statistics.

A shading assigns to each line a set of ball centers of radius ``delta`` placed on the line inside
``B^3(0, 1)``; the shading of one center stands for a piece of tube of volume ``pi delta^3``.
Union volumes and line multiplicities are measured on a voxel grid of spacing ``delta / 2``, a
voxel counting as covered when its center lies within ``delta`` of a ball center.
"""
import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
from numpy.random import Generator
from scipy.spatial import cKDTree

from .classes.base import ConjectureViolation, PreconditionError, Validateable

__all__ = [
    "DIMENSION",
    "C_MIN",
    "LineFamily",
    "Shading",
    "TwoEndsResult",
    "FurstenbergResult",
    "PruneResult",
    "chord",
    "bush_family",
    "brush_family",
    "parallel_family",
    "random_family",
    "full_shading",
    "random_shading",
    "segment_shading",
    "shading_density",
    "two_ends_check",
    "two_ends_oracle",
    "union_volume",
    "line_multiplicity",
    "furstenberg_ratio",
    "max_directions_per_ball",
    "pruning_mu",
    "prune_multiplicity",
]

logger = logging.getLogger(__name__)

DIMENSION = 3
"""Ambient dimension ``n``; the density enters the Furstenberg bound with exponent ``(n - 1) / 2``."""
C_MIN = 1e-2
"""Default pass threshold of the measured Furstenberg constant."""
_STENCIL_REACH = 3
_RASTER_CHUNK = 1 << 14


@dataclass(frozen=True, eq=False)
class LineFamily(Validateable):
    """Lines ``points[k] + t directions[k]`` whose directions are ``delta``-separated up to sign."""

    points: np.ndarray
    directions: np.ndarray
    delta: float

    def coerce(self):
        points = np.asarray(self.points, dtype=float).reshape(-1, 3)
        directions = np.asarray(self.directions, dtype=float).reshape(-1, 3)
        norms = np.linalg.norm(directions, axis=1)
        if np.any(norms == 0):
            raise ValueError("directions must be nonzero")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "directions", directions / norms[:, None])

    def validate(self):
        if not 0 < self.delta < 1:
            raise ValueError(f"delta must lie in (0, 1) (got {self.delta})")
        if self.points.shape != self.directions.shape:
            raise ValueError(f"got {self.points.shape[0]} points for {self.directions.shape[0]} directions")
        count = len(self)
        if count < 2:
            return
        signed = np.vstack([self.directions, -self.directions])
        for i, j in cKDTree(signed).query_pairs(self.delta * (1 - 1e-12)):
            if i % count != j % count:
                raise ValueError(f"directions of lines {i % count} and {j % count} are closer than delta={self.delta}")

    def __len__(self) -> int:
        return self.points.shape[0]


def chord(point: Sequence[float], direction: Sequence[float]) -> tuple[float, float] | None:
    """Parameter interval of the line ``point + t direction`` (unit direction) inside the unit ball."""
    p = np.asarray(point, dtype=float)
    u = np.asarray(direction, dtype=float)
    b = float(p @ u)
    disc = b * b - (float(p @ p) - 1)
    if disc <= 0:
        return None
    root = math.sqrt(disc)
    return -b - root, -b + root


@dataclass(frozen=True, eq=False)
class Shading(Validateable):
    """Ball centers on each line of a family, given by their line parameters ``t``."""

    family: LineFamily
    parameters: tuple[np.ndarray, ...]

    def coerce(self):
        object.__setattr__(self, "parameters", tuple(np.sort(np.asarray(t, dtype=float).ravel()) for t in self.parameters))

    def validate(self):
        if len(self.parameters) != len(self.family):
            raise ValueError(f"got shadings for {len(self.parameters)} lines of a family of {len(self.family)}")
        for k, t in enumerate(self.parameters):
            centers = self.family.points[k] + t[:, None] * self.family.directions[k]
            if t.size and np.any(np.linalg.norm(centers, axis=1) > 1 + 1e-12):
                raise ValueError(f"shading of line {k} leaves the unit ball")

    @classmethod
    def from_centers(cls, family: LineFamily, centers: Sequence[np.ndarray]) -> "Shading":
        """
        Build a shading from ball centers.

        :raises ValueError: if a center is farther than ``delta`` from its line.
        """
        parameters = []
        for k, c in enumerate(centers):
            c = np.asarray(c, dtype=float).reshape(-1, 3)
            rel = c - family.points[k]
            t = rel @ family.directions[k]
            distance = np.linalg.norm(rel - t[:, None] * family.directions[k], axis=1)
            if np.any(distance > family.delta * (1 + 1e-9)):
                raise ValueError(f"a ball center of line {k} lies farther than delta from the line")
            parameters.append(t)
        return cls(family, tuple(parameters))

    def centers(self, k: int) -> np.ndarray:
        return self.family.points[k] + self.parameters[k][:, None] * self.family.directions[k]

    def all_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """All ball centers and the index of their line."""
        if not len(self.family):
            return np.zeros((0, 3)), np.zeros(0, dtype=int)
        centers = np.vstack([self.centers(k) for k in range(len(self.family))])
        owners = np.concatenate([np.full(t.size, k) for k, t in enumerate(self.parameters)])
        return centers, owners

    def volume(self, k: int) -> float:
        """``|Y(l)|`` in the tube-piece model."""
        return self.parameters[k].size * math.pi * self.family.delta**3

    def total_volume(self) -> float:
        return math.fsum(self.volume(k) for k in range(len(self.family)))


def _chord_parameters(family: LineFamily, k: int, spacing: float) -> np.ndarray:
    interval = chord(family.points[k], family.directions[k])
    if interval is None:
        return np.zeros(0)
    t0, t1 = interval
    count = math.floor((t1 - t0) / spacing)
    return t0 + (np.arange(count) + 0.5) * spacing + ((t1 - t0) - count * spacing) / 2


def full_shading(family: LineFamily) -> Shading:
    """Centers every ``delta`` along each chord."""
    return Shading(family, tuple(_chord_parameters(family, k, family.delta) for k in range(len(family))))


def random_shading(family: LineFamily, density: float, rng: Generator) -> Shading:
    """Keep each center of the full shading independently with probability ``density``."""
    full = full_shading(family)
    return Shading(family, tuple(t[rng.random(t.size) < density] for t in full.parameters))


def segment_shading(family: LineFamily, start: float, length: float) -> Shading:
    """Full shading restricted to the parameter window ``[chord start + start, + length)`` of each line."""
    parameters = []
    for k, t in enumerate(full_shading(family).parameters):
        interval = chord(family.points[k], family.directions[k])
        if interval is None:
            parameters.append(t)
            continue
        lo = interval[0] + start
        parameters.append(t[(t >= lo) & (t < lo + length)])
    return Shading(family, tuple(parameters))


def shading_density(shading: Shading) -> np.ndarray:
    """``|Y(l)| / |N_delta(l) cap B^3|`` for each line, in the tube-piece model."""
    family = shading.family
    values = np.zeros(len(family))
    for k, t in enumerate(shading.parameters):
        interval = chord(family.points[k], family.directions[k])
        if interval is not None:
            values[k] = t.size * family.delta / (interval[1] - interval[0])
    return values


def _fibonacci_hemisphere(count: int) -> np.ndarray:
    k = np.arange(count) + 0.5
    z = 1 - k / count
    phi = math.pi * (3 - math.sqrt(5)) * k
    rho = np.sqrt(1 - z * z)
    return np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1)


def bush_family(delta: float, count: int) -> LineFamily:
    """
    ``count`` lines through the origin with directions spread over the upper hemisphere.

    :raises ValueError: if ``count`` directions cannot be ``delta``-separated this way.
    """
    return LineFamily(np.zeros((count, 3)), _fibonacci_hemisphere(count), delta)


def brush_family(delta: float, count: int) -> LineFamily:
    """Lines crossing the ``x1`` axis at spread points, with directions fanned out in the ``x2 x3`` plane."""
    phi = (np.arange(count) + 0.5) * math.pi / count
    directions = np.stack([np.zeros(count), np.cos(phi), np.sin(phi)], axis=1)
    points = np.stack([np.linspace(-0.5, 0.5, count), np.zeros(count), np.zeros(count)], axis=1)
    return LineFamily(points, directions, delta)


def parallel_family(delta: float, side: int) -> LineFamily:
    """
    ``side^2`` nearly vertical lines with pairwise disjoint ``delta``-tubes inside the unit ball.

    Line ``(i, j)`` passes through ``4 delta (i, j, 0)`` with direction ``(1.5 delta i, 1.5 delta j, 1)``,
    indices centered at 0.
    """
    index = np.arange(side) - (side - 1) / 2
    i, j = (a.ravel() for a in np.meshgrid(index, index, indexing="ij"))
    points = np.stack([4 * delta * i, 4 * delta * j, np.zeros(i.size)], axis=1)
    directions = np.stack([1.5 * delta * i, 1.5 * delta * j, np.ones(i.size)], axis=1)
    directions /= np.linalg.norm(directions, axis=1)[:, None]
    return LineFamily(points, directions, delta)


def random_family(delta: float, count: int, rng: Generator, spread: float = 0.3) -> LineFamily:
    """
    Lines through random points of ``B(0, spread)`` with random separated directions.

    Candidate directions closer than ``delta`` to an accepted one are redrawn.
    """
    directions: list[np.ndarray] = []
    attempts = 0
    while len(directions) < count:
        attempts += 1
        if attempts > 100 * count + 1000:
            raise ValueError(f"could not draw {count} directions separated by {delta}")
        u = rng.normal(size=3)
        u /= np.linalg.norm(u)
        if all(min(np.linalg.norm(u - v), np.linalg.norm(u + v)) >= delta for v in directions):
            directions.append(u)
    raw = rng.normal(size=(count, 3))
    radii = spread * rng.random(count) ** (1 / 3)
    points = raw / np.linalg.norm(raw, axis=1)[:, None] * radii[:, None]
    return LineFamily(points, np.array(directions).reshape(-1, 3), delta)


@dataclass(frozen=True)
class TwoEndsResult:
    """
    Outcome of a two-ends scan.

    ``worst`` is ``(line, segment start, fraction)`` for the segment holding the largest fraction
    of its line's shading; ``empty_lines`` lists lines with empty shading, which pass vacuously.
    """

    passed: bool
    density: float
    worst: tuple[int, float, float]
    empty_lines: list[int] = field(default_factory=list)


def two_ends_check(family: LineFamily, shading: Shading, epsilon1: float, epsilon2: float, C_Y: float = 1.0) -> TwoEndsResult:
    """
    Check ``|Y(l) cap J| <= C_Y delta^epsilon2 |Y(l)|`` for every segment ``J`` of length ``delta^epsilon1``.

    Segments start at every multiple of ``delta / 2`` along each chord; a ball belongs to a segment
    when its center does.

    :raises ValueError: unless ``0 < epsilon2 < epsilon1 < 1``.
    """
    if not 0 < epsilon2 < epsilon1 < 1:
        raise ValueError(f"need 0 < epsilon2 < epsilon1 < 1 (got {epsilon1}, {epsilon2})")
    delta = family.delta
    length = delta**epsilon1
    bound = C_Y * delta**epsilon2
    worst = (-1, 0.0, 0.0)
    empty = []
    for k, t in enumerate(shading.parameters):
        if t.size == 0:
            empty.append(k)
            continue
        t0, t1 = chord(family.points[k], family.directions[k])
        starts = t0 + np.arange(math.floor((t1 - t0) / (delta / 2)) + 1) * (delta / 2)
        counts = np.searchsorted(t, starts + length, side="left") - np.searchsorted(t, starts, side="left")
        best = int(np.argmax(counts))
        fraction = counts[best] / t.size
        if fraction > worst[2]:
            worst = (k, float(starts[best] - t0), float(fraction))
    if empty:
        logger.warning(f"{len(empty)} lines have empty shading")
    density = float(np.min(shading_density(shading), initial=math.inf)) if len(family) else 0.0
    return TwoEndsResult(worst[2] <= bound, density, worst, empty)


def two_ends_oracle(family: LineFamily, shading: Shading, epsilon1: float) -> float:
    """
    Largest fraction of a line's shading inside one segment, by exhaustive scan.

    Scans the same segments as :func:`two_ends_check` one at a time, counting ball centers with
    a full comparison.
    """
    delta = family.delta
    length = delta**epsilon1
    worst = 0.0
    for k, t in enumerate(shading.parameters):
        if t.size == 0:
            continue
        t0, t1 = chord(family.points[k], family.directions[k])
        for m in range(math.floor((t1 - t0) / (delta / 2)) + 1):
            start = t0 + m * (delta / 2)
            inside = sum(1 for value in t if start <= value < start + length)
            worst = max(worst, inside / t.size)
    return worst


def _rasterize(shading: Shading) -> tuple[np.ndarray, np.ndarray]:
    """Covered voxel keys and, for each, the number of distinct lines covering it."""
    delta = shading.family.delta
    spacing = delta / 2
    centers, owners = shading.all_centers()
    if centers.shape[0] == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    reach = np.arange(-_STENCIL_REACH, _STENCIL_REACH + 1)
    stencil = np.stack(np.meshgrid(reach, reach, reach, indexing="ij"), axis=-1).reshape(-1, 3)
    size = math.ceil(2.5 / spacing) + 2 * _STENCIL_REACH
    origin = -1.25
    pairs = []
    for lo in range(0, centers.shape[0], _RASTER_CHUNK):
        block = centers[lo : lo + _RASTER_CHUNK]
        base = np.floor((block - origin) / spacing).astype(np.int64)
        cells = base[:, None, :] + stencil[None, :, :]
        voxel_centers = origin + (cells + 0.5) * spacing
        inside = np.sum((voxel_centers - block[:, None, :]) ** 2, axis=-1) <= delta * delta
        keys = (cells[..., 0] * size + cells[..., 1]) * size + cells[..., 2]
        line = np.broadcast_to(owners[lo : lo + _RASTER_CHUNK, None], keys.shape)
        pairs.append(np.unique(np.stack([keys[inside], line[inside]], axis=1), axis=0))
    unique_pairs = np.unique(np.vstack(pairs), axis=0)
    keys, counts = np.unique(unique_pairs[:, 0], return_counts=True)
    return keys, counts


def union_volume(family: LineFamily, shading: Shading) -> float:
    """Volume of the union of the shading balls, by rasterization on a ``delta / 2`` grid."""
    keys, _ = _rasterize(shading)
    return keys.size * (family.delta / 2) ** 3


def line_multiplicity(shading: Shading) -> np.ndarray:
    """Number of lines covering each covered voxel."""
    return _rasterize(shading)[1]


@dataclass(frozen=True)
class FurstenbergResult:
    """Measured constant ``c = |U Y(l)| / (delta^eps lambda^((n-1)/2) sum |Y(l)|)`` and its inputs."""

    constant: float
    passed: bool
    union: float
    density: float
    total: float
    two_ends: TwoEndsResult


def furstenberg_ratio(
    family: LineFamily,
    shading: Shading,
    epsilon: float,
    epsilon1: float = 0.5,
    epsilon2: float = 0.25,
    C_Y: float = 1.0,
    c_min: float = C_MIN,
    strict: bool = False,
) -> FurstenbergResult:
    """
    Measure the constant of the two-ends Furstenberg inequality on one configuration.

    :param strict: Raise instead of returning a failing result.
    :raises PreconditionError: if the shading is not two-ends or is empty.
    :raises ConjectureViolation: with ``strict``, if the measured constant is below ``c_min``.
    """
    two_ends = two_ends_check(family, shading, epsilon1, epsilon2, C_Y)
    if not two_ends.passed:
        raise PreconditionError(f"shading is not two-ends (worst segment fraction {two_ends.worst[2]:.3f})")
    total = shading.total_volume()
    if total == 0 or two_ends.density == 0:
        raise PreconditionError("shading is empty on some line")
    union = union_volume(family, shading)
    exponent = (DIMENSION - 1) / 2
    constant = union / (family.delta**epsilon * two_ends.density**exponent * total)
    result = FurstenbergResult(constant, constant >= c_min, union, two_ends.density, total, two_ends)
    logger.debug(f"furstenberg constant {constant:.4f} for {len(family)} lines at delta={family.delta}")
    if strict and not result.passed:
        bundle = {
            "delta": family.delta,
            "epsilon": epsilon,
            "constant": constant,
            "points": family.points.tolist(),
            "directions": family.directions.tolist(),
            "parameters": [t.tolist() for t in shading.parameters],
        }
        raise ConjectureViolation(f"measured constant {constant:.4g} is below {c_min}", bundle)
    return result


def max_directions_per_ball(family: LineFamily) -> int:
    """Largest number of directions (up to sign) in a ``delta``-ball of the sphere centered at a direction."""
    if not len(family):
        return 0
    signed = np.vstack([family.directions, -family.directions])
    tree = cKDTree(signed)
    counts = [len({i % len(family) for i in tree.query_ball_point(u, family.delta)}) for u in family.directions]
    return max(counts)


def pruning_mu(family: LineFamily, shading: Shading, epsilon1: float) -> float:
    """Multiplicity threshold ``delta^(-2 eps1) m lambda^(-3/4) delta^(-1/2)``."""
    density = float(np.min(shading_density(shading)))
    if density == 0:
        return math.inf
    delta = family.delta
    return delta ** (-2 * epsilon1) * max_directions_per_ball(family) * density ** (-0.75) * delta**-0.5


@dataclass(frozen=True)
class PruneResult:
    """Voxels of the union kept at multiplicity at most ``mu``."""

    mu: float
    kept: np.ndarray
    covered: int
    removed_fraction: float


def prune_multiplicity(family: LineFamily, shading: Shading, mu: float) -> PruneResult:
    """
    Keep the voxels of the union covered by at most ``mu`` lines.

    :returns: Kept voxel keys and ``|E_L minus E_mu| / |E_L|``.
    :raises ValueError: unless ``mu > 0``.
    """
    if not mu > 0:
        raise ValueError(f"mu must be positive (got {mu})")
    keys, counts = _rasterize(shading)
    kept = keys[counts <= mu]
    removed = 0.0 if keys.size == 0 else 1 - kept.size / keys.size
    return PruneResult(mu, kept, int(keys.size), removed)
