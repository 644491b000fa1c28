"""
Wave packet decomposition at scale ``R`` and tube geometry.

The frequency square ``[-1, 1]^2`` is tiled by caps ``theta`` of side at most ``R^(-1/2)`` carrying
a smooth partition of unity, and the spatial period of the sampled extension is tiled by cells of
side about ``R^(1/2)``. The packet of ``(theta, v)`` is the cap piece convolved (in frequency) with
the Fourier coefficients of the cell indicator smoothed by a Gaussian, so on the slice ``x3 = 0``
its extension is the cap piece's extension times a smooth cutoff to the cell. Since the cutoffs
sum to 1, the packets sum back to ``f`` exactly.
"""
import logging
import math
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .classes.base import InvariantViolation, PreconditionError, Validateable
from .field import BallUnion, FreqDensity, combine, extend_at, phase_gradient
from .geom import Square, tile
from .utils import dyadic_bucket, worker_count

__all__ = [
    "TUBE_SCALE",
    "Tube",
    "TubeSegment",
    "TubeShading",
    "WavePacket",
    "WavePacketDecomp",
    "PacketKernel",
    "decompose",
    "tube_ball_multiplicity",
    "max_tube_multiplicity",
    "segment_and_shade",
    "segment_density",
    "direction_separation",
    "tube_overlap",
    "tail_ratio",
    "frequency_leakage",
    "shaded_l2_ratio",
]

logger = logging.getLogger(__name__)

TUBE_SCALE = 2 * math.pi
"""Tube radius is ``TUBE_SCALE * R^(1/2 + eps0)``."""
KERNEL_TRUNCATION = 9.0
"""Frequency kernels are truncated at this many standard deviations."""
DROP_TOLERANCE = 1e-7
"""Packets are dropped while their accumulated norm stays below this fraction of ``||f||_2``."""
_TERNARY_STEPS = 100


@dataclass(frozen=True, eq=False)
class Tube(Validateable):
    """
    The tube ``{(x, x3) : |x - c_v + x3 grad Phi(c_theta)| <= radius, |x3| <= length / 2}``.

    ``direction`` is ``V(theta) = (1, grad Phi(c_theta))``; ``length`` is the diameter ``2R`` of ``B_R``.
    """

    theta_index: tuple[int, int]
    v_index: tuple[int, int]
    c_theta: tuple[float, float]
    c_v: tuple[float, float]
    direction: np.ndarray
    radius: float
    length: float

    def coerce(self):
        object.__setattr__(self, "direction", np.asarray(self.direction, dtype=float))

    def validate(self):
        if self.direction.shape != (3,) or self.direction[0] != 1:
            raise ValueError(f"direction must be a 3-vector with first component 1 (got {self.direction})")
        if not self.radius > 0 or not self.length > 0:
            raise ValueError(f"radius and length must be positive (got {self.radius}, {self.length})")

    @property
    def gradient(self) -> np.ndarray:
        return self.direction[1:]

    def axis_point(self, x3: np.ndarray) -> np.ndarray:
        """Horizontal position of the axis at height ``x3``; shape ``(..., 2)``."""
        x3 = np.asarray(x3, dtype=float)
        return np.asarray(self.c_v) - x3[..., None] * self.gradient

    def contains(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        offset = points[..., :2] - self.axis_point(points[..., 2])
        return (np.sum(offset**2, axis=-1) <= self.radius**2) & (np.abs(points[..., 2]) <= self.length / 2)

    def meets_ball(self, center: Sequence[float], radius: float) -> bool:
        return bool(_tubes_meet_ball([self], center, radius)[0])


def _tubes_meet_ball(tubes: Sequence[Tube], center: Sequence[float], radius: float) -> np.ndarray:
    if not tubes:
        return np.zeros(0, dtype=bool)
    q = np.asarray(center, dtype=float)
    cv = np.array([t.c_v for t in tubes])
    grad = np.array([t.gradient for t in tubes])
    radii = np.array([t.radius for t in tubes])
    half = np.array([t.length / 2 for t in tubes])
    lo = np.maximum(q[2] - radius, -half)
    hi = np.minimum(q[2] + radius, half)
    valid = lo <= hi

    def gap(x3: np.ndarray) -> np.ndarray:
        axis = cv - x3[:, None] * grad
        horizontal = np.hypot(axis[:, 0] - q[0], axis[:, 1] - q[1])
        return horizontal - np.sqrt(np.maximum(radius**2 - (x3 - q[2]) ** 2, 0.0))

    # gap is convex in x3, so a ternary search finds its minimum
    a, b = lo.copy(), np.where(valid, hi, lo)
    for _ in range(_TERNARY_STEPS):
        m1 = a + (b - a) / 3
        m2 = b - (b - a) / 3
        left = gap(m1) <= gap(m2)
        b = np.where(left, m2, b)
        a = np.where(left, a, m1)
    best = np.minimum(np.minimum(gap(a), gap(lo)), gap(np.where(valid, hi, lo)))
    return valid & (best <= radii)


@dataclass(frozen=True, eq=False)
class WavePacket:
    """One packet: its tube, its cap and its density (stored on a padded window)."""

    tube: Tube
    theta: Square
    density: FreqDensity

    @property
    def norm(self) -> float:
        return self.density.l2_norm()


@dataclass(frozen=True, eq=False)
class WavePacketDecomp:
    """Packets of a density at scale ``R``."""

    packets: list[WavePacket]
    parent: FreqDensity
    R: float
    epsilon0: float = 0.0
    dropped_norm: float = 0.0

    @classmethod
    def from_packets(cls, packets: Sequence[WavePacket], parent: FreqDensity | None, R: float, epsilon0: float = 0.0) -> "WavePacketDecomp":
        """Assemble a decomposition from chosen packets; the parent defaults to their sum."""
        if parent is None:
            parent = combine([p.density for p in packets]).embedded()
        return cls(list(packets), parent, R, epsilon0)

    @property
    def tubes(self) -> list[Tube]:
        return [p.tube for p in self.packets]

    def reconstruct(self) -> FreqDensity:
        """Sum of the packets on the union of their windows."""
        if not self.packets:
            return self.parent.scaled(0)
        return combine([p.density for p in self.packets])

    def residual(self) -> float:
        """``||f - sum f_T||_2 / ||f||_2``."""
        norm = self.parent.l2_norm()
        if norm == 0:
            return 0.0
        difference = combine([self.parent.scaled(-1)] + [p.density for p in self.packets])
        return difference.l2_norm() / norm

    def packet_mass(self) -> float:
        """``sum_T ||f_T||_2^2``."""
        return math.fsum(p.density.mass() for p in self.packets)


@dataclass(frozen=True)
class TubeSegment:
    """A piece ``x3 in [x3_low, x3_high)`` of a tube."""

    tube: Tube
    x3_low: float
    x3_high: float
    index: int

    @property
    def length(self) -> float:
        return self.x3_high - self.x3_low


@dataclass(frozen=True, eq=False)
class TubeShading:
    """
    Segments of one tube bucketed by the density of ``X`` inside them.

    ``classes[J]`` is the dyadic exponent ``k`` of the class of segment ``J``, or `None` when the
    segment misses ``X``. ``lam`` is the chosen density class ``2^(k+1)``, ``beta`` the number of
    segments in it and ``shaded`` their indices.
    """

    tube: Tube
    segments: list[TubeSegment]
    densities: np.ndarray
    classes: list[int | None]
    lam: float | None
    beta: int
    shaded: list[int] = field(default_factory=list)

    @property
    def beta_class(self) -> int:
        """Smallest power of two at least ``beta`` (0 for an empty shading)."""
        return 0 if self.beta == 0 else 1 << (self.beta - 1).bit_length()

    def shading_weight(self, points: np.ndarray, ramp: float = 0.0) -> np.ndarray:
        """
        Indicator of the shaded segments of the tube at the given points.

        With ``ramp > 0`` the ``x3`` edges of each segment are smoothed over that width.
        """
        points = np.asarray(points, dtype=float)
        inside = self.tube.contains(points).astype(float)
        x3 = points[..., 2]
        weight = np.zeros_like(x3)
        for J in self.shaded:
            seg = self.segments[J]
            if ramp > 0:
                weight += np.clip((x3 - seg.x3_low) / ramp + 0.5, 0, 1) * np.clip((seg.x3_high - x3) / ramp + 0.5, 0, 1)
            else:
                weight += (x3 >= seg.x3_low) & (x3 < seg.x3_high)
        return inside * np.minimum(weight, 1.0)


class PacketKernel:
    """
    Cap and cell geometry plus frequency kernels for packets of one density at scale ``R``.

    :param f: Parent density on ``[-1, 1]^2``.
    :param R: Scale.
    :param epsilon0: Tube radius exponent excess.
    """

    def __init__(self, f: FreqDensity, R: float, epsilon0: float = 0.0):
        self.f = f.embedded() if f.offset != (0, 0) else f
        self.R = R
        self.epsilon0 = epsilon0
        h = f.spacing
        self.cap_count = max(1, math.ceil(2 * math.sqrt(R) - 1e-9))
        self.cap_side = 2 / self.cap_count
        self.caps = tile(Square((0.0, 0.0), 2.0), self.cap_side)
        period = f.period
        self.cell_count = max(1, round(period / math.sqrt(R)))
        self.cell_side = period / self.cell_count
        self.cell_centers = -period / 2 + (np.arange(self.cell_count) + 0.5) * self.cell_side
        self.sigma = self.cap_side / math.pi
        self.half_width = math.ceil(KERNEL_TRUNCATION * self.sigma / h)
        omega = np.arange(-self.half_width, self.half_width + 1) * h
        khat = np.exp(-(omega**2) / (2 * self.sigma**2))
        lo = self.cell_centers - self.cell_side / 2
        hi = lo + self.cell_side
        with np.errstate(divide="ignore", invalid="ignore"):
            integral = (np.exp(-1j * np.outer(hi, omega)) - np.exp(-1j * np.outer(lo, omega))) / (-1j * omega[None, :])
        integral[:, self.half_width] = self.cell_side
        self.coefficients = khat[None, :] * integral / period
        self.radius = TUBE_SCALE * R ** (0.5 + epsilon0)

    def tube(self, theta_index: tuple[int, int], v_index: tuple[int, int]) -> Tube:
        theta = self.caps[theta_index[0] * self.cap_count + theta_index[1]]
        gradient = phase_gradient(self.f.surface, *theta.center)
        c_v = (float(self.cell_centers[v_index[0]]), float(self.cell_centers[v_index[1]]))
        return Tube(theta_index, v_index, theta.center, c_v, (1.0, *gradient), self.radius, 2 * self.R)

    def _toeplitz(self, length: int) -> np.ndarray:
        rows = length + 2 * self.half_width
        shift = np.arange(rows)[:, None] - np.arange(length)[None, :]
        valid = (shift >= 0) & (shift <= 2 * self.half_width)
        return np.where(valid[None, :, :], self.coefficients[:, np.clip(shift, 0, 2 * self.half_width)], 0)

    def cap_piece(self, theta: Square) -> FreqDensity | None:
        """Smooth cap piece ``f phi_theta`` on the bounding window of the bump, or `None` if it vanishes."""
        xi, eta = self.f.xi_axis, self.f.eta_axis
        bump = theta.bump(xi[:, None], eta[None, :])
        rows = np.flatnonzero(bump.any(axis=1))
        cols = np.flatnonzero(bump.any(axis=0))
        if rows.size == 0 or cols.size == 0:
            return None
        window = (self.f.samples * bump)[rows[0] : rows[-1] + 1, cols[0] : cols[-1] + 1]
        if not np.any(window):
            return None
        return self.f.with_samples(window, (int(rows[0]), int(cols[0])))

    def cap_packets(self, theta_index: tuple[int, int], cells: Sequence[tuple[int, int]] | None = None, budget: float = 0.0) -> tuple[list[WavePacket], float]:
        """
        All packets of one cap.

        :param theta_index: Cap index ``(i, j)``.
        :param cells: Restrict to these cells; all cells by default.
        :param budget: Packets are dropped, smallest first, while their norms add up to at most this.
        :returns: Kept packets and the dropped norm.
        """
        theta = self.caps[theta_index[0] * self.cap_count + theta_index[1]]
        piece = self.cap_piece(theta)
        if piece is None:
            return [], 0.0
        a1 = self._toeplitz(piece.samples.shape[0])
        a2 = self._toeplitz(piece.samples.shape[1])
        left = np.einsum("xpa,ab->xpb", a1, piece.samples, optimize=True)
        if cells is None:
            cells = [(v1, v2) for v1 in range(self.cell_count) for v2 in range(self.cell_count)]
        offset = (piece.offset[0] - self.half_width, piece.offset[1] - self.half_width)
        h2 = self.f.spacing**2
        candidates = []
        for v1, v2 in cells:
            samples = left[v1] @ a2[v2].T
            norm = math.sqrt(float(np.sum(np.abs(samples) ** 2)) * h2)
            candidates.append((norm, (v1, v2), samples))
        dropped = 0.0
        kept = []
        for norm, v_index, samples in sorted(candidates, key=lambda c: (c[0], c[1])):
            if dropped + norm <= budget:
                dropped += norm
                continue
            density = self.f.with_samples(samples, offset)
            kept.append(WavePacket(self.tube(theta_index, v_index), theta, density))
        kept.sort(key=lambda p: p.tube.v_index)
        return kept, dropped


def decompose(f: FreqDensity, R: float, epsilon0: float = 0.0, tolerance: float = DROP_TOLERANCE) -> WavePacketDecomp:
    """
    Wave packet decomposition of ``f`` at scale ``R``.

    :param f: Density resolving caps at scale ``R``.
    :param R: Scale.
    :param epsilon0: Tube radius exponent excess.
    :param tolerance: Relative norm that may be discarded by dropping negligible packets.
    :returns: The decomposition; packets are ordered by cap then cell.
    :raises InvariantViolation: if ``f`` does not resolve caps at scale ``R``.
    """
    if not f.resolves(R):
        raise InvariantViolation(f"density spacing {f.spacing} does not resolve caps at R={R}")
    kernel = PacketKernel(f, R, epsilon0)
    caps = [(i, j) for i in range(kernel.cap_count) for j in range(kernel.cap_count)]
    budget = tolerance * f.l2_norm() / len(caps)

    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        results = list(pool.map(lambda idx: kernel.cap_packets(idx, budget=budget), caps))
    packets = [p for kept, _ in results for p in kept]
    dropped = math.fsum(d for _, d in results)
    logger.debug(f"decomposed at R={R}: {len(packets)} packets over {len(caps)} caps, dropped norm {dropped:.3e}")
    return WavePacketDecomp(packets, kernel.f, R, epsilon0, dropped)


def tube_ball_multiplicity(tubes: Sequence[Tube], Q: BallUnion) -> int:
    """
    Count the tubes meeting a ball.

    :param tubes: Tubes.
    :param Q: A region consisting of exactly one ball.
    :returns: The number of tubes intersecting it.
    """
    if Q.centers.shape[0] != 1:
        raise ValueError(f"expected a single ball (got {Q.centers.shape[0]})")
    return int(np.count_nonzero(_tubes_meet_ball(tubes, Q.centers[0], Q.radius)))


def max_tube_multiplicity(tubes: Sequence[Tube], X: BallUnion) -> int:
    """Largest number of tubes meeting a single ball of ``X`` (0 for empty ``X``)."""
    counts = [int(np.count_nonzero(_tubes_meet_ball(tubes, c, X.radius))) for c in X.centers]
    return max(counts, default=0)


def _disc_offsets(radius: float, per_axis: int = 7) -> np.ndarray:
    axis = (np.arange(per_axis) - (per_axis - 1) / 2) * (2 * radius / per_axis)
    grid = np.stack(np.meshgrid(axis, axis, indexing="ij"), axis=-1).reshape(-1, 2)
    return grid[np.sum(grid**2, axis=1) <= radius**2]


def segment_density(segment: TubeSegment, X: BallUnion, step: float) -> float:
    """
    Fraction of a tube segment lying in ``X``.

    Measured on a stencil of ``x3`` midpoints spaced at most ``step`` times a lattice of
    cross-section offsets.
    """
    count = max(4, math.ceil(segment.length / step))
    x3 = segment.x3_low + (np.arange(count) + 0.5) * segment.length / count
    offsets = _disc_offsets(segment.tube.radius)
    axis = segment.tube.axis_point(x3)
    horizontal = axis[:, None, :] + offsets[None, :, :]
    points = np.concatenate([horizontal, np.broadcast_to(x3[:, None, None], horizontal.shape[:2] + (1,))], axis=-1)
    return float(np.mean(X.contains(points)))


def _segments(tube: Tube, length: float) -> list[TubeSegment]:
    count = max(1, math.ceil(tube.length / length - 1e-9))
    step = tube.length / count
    lo = -tube.length / 2
    return [TubeSegment(tube, lo + k * step, lo + (k + 1) * step, k) for k in range(count)]


def segment_and_shade(decomp: WavePacketDecomp, X: BallUnion, r: float, epsilon: float) -> list[TubeShading]:
    """
    Cut every tube into segments of length about ``r^(1 - eps^2)`` and shade by density class.

    Each segment meeting ``X`` gets the dyadic class of ``|J cap X| / |J|`` clamped into
    ``[r^(-1/2), r^(-eps^2)]``; the classes partition the segments meeting ``X``. The tube's class
    ``lam`` is the one carrying the most ``X`` density (ties go to the larger class), and its
    shading is the union of the segments in that class.

    :param decomp: Packets whose tubes are shaded.
    :param X: Union of balls of radius ``r^(1/2)``.
    :param r: Scale of the tubes.
    :param epsilon: Exponent setting segment length and class range.
    :returns: One shading per packet, in packet order.
    :raises PreconditionError: if ``eps^2 > 1/2`` or the balls of ``X`` have the wrong radius.
    """
    if not 0 < epsilon <= math.sqrt(0.5):
        raise PreconditionError(f"epsilon must lie in (0, 2^(-1/2)] (got {epsilon})")
    if not X.is_empty() and not math.isclose(X.radius, math.sqrt(r), rel_tol=1e-6):
        raise PreconditionError(f"balls of X must have radius r^(1/2) = {math.sqrt(r)} (got {X.radius})")
    segment_length = r ** (1 - epsilon**2)
    top = dyadic_bucket(r ** (-(epsilon**2)))
    bottom = dyadic_bucket(r**-0.5)
    step = math.sqrt(r) / 4
    shadings = []
    for tube in decomp.tubes:
        segments = _segments(tube, segment_length)
        if X.is_empty():
            densities = np.zeros(len(segments))
        else:
            densities = np.array([segment_density(seg, X, step) for seg in segments])
        classes: list[int | None] = [None if d == 0 else dyadic_bucket(d, bottom, top) for d in densities]
        totals: dict[int, float] = {}
        for k, d in zip(classes, densities):
            if k is not None:
                totals[k] = totals.get(k, 0.0) + float(d)
        if not totals:
            shadings.append(TubeShading(tube, segments, densities, classes, None, 0, []))
            continue
        chosen = max(totals, key=lambda k: (totals[k], k))
        shaded = [J for J, k in enumerate(classes) if k == chosen]
        shadings.append(TubeShading(tube, segments, densities, classes, 2.0 ** (chosen + 1), len(shaded), shaded))
    return shadings


def direction_separation(tubes: Sequence[Tube]) -> float:
    """Smallest distance between distinct directions ``V(theta)``; infinite for a single direction."""
    directions = np.unique(np.round(np.array([t.direction for t in tubes]), 12), axis=0)
    if directions.shape[0] < 2:
        return math.inf
    distances, _ = cKDTree(directions).query(directions, k=2)
    return float(distances[:, 1].min())


def tube_overlap(tubes: Sequence[Tube], points: np.ndarray) -> int:
    """Largest number of same-direction tubes containing one of the given points."""
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    groups: dict[tuple[int, int], list[Tube]] = {}
    for t in tubes:
        groups.setdefault(t.theta_index, []).append(t)
    best = 0
    for group in groups.values():
        counts = np.zeros(points.shape[0], dtype=int)
        for t in group:
            counts += t.contains(points)
        best = max(best, int(counts.max(initial=0)))
    return best


def tail_ratio(packet: WavePacket, factor: float = 4.0, direction: tuple[float, float] = (1.0, 0.0), samples: int = 241) -> float:
    """
    Decay of a packet away from its tube.

    ``|Ef_T|`` is sampled on a ray in the plane ``x3 = 0`` starting at the tube axis; the result is
    the largest value at distance at least ``factor`` radii divided by the largest value on the ray.

    :raises ValueError: if the ray would wrap around the spatial period.
    """
    radius = packet.tube.radius
    reach = (factor + 2) * radius
    if reach >= packet.density.period / 2:
        raise ValueError(f"ray of length {reach} wraps around the period {packet.density.period}")
    u = np.asarray(direction, dtype=float)
    u = u / np.hypot(*u)
    dist = np.linspace(0, reach, samples)
    origin = np.asarray(packet.tube.c_v)
    points = np.column_stack([origin[0] + dist * u[0], origin[1] + dist * u[1], np.zeros_like(dist)])
    values = np.abs(extend_at(packet.density, points))
    peak = values.max()
    if peak == 0:
        return 0.0
    return float(values[dist >= factor * radius].max() / peak)


def frequency_leakage(packet: WavePacket) -> float:
    """Fraction of a packet's L2 mass outside ``3 theta``."""
    xi, eta = packet.density.mesh()
    c1, c2 = packet.theta.center
    half = 1.5 * packet.theta.side
    inside = (np.abs(xi - c1) <= half) & (np.abs(eta - c2) <= half)
    total = np.sum(np.abs(packet.density.samples) ** 2)
    if total == 0:
        return 0.0
    return float(np.sum(np.abs(packet.density.samples[~inside]) ** 2) / total)


def shaded_l2_ratio(decomp: WavePacketDecomp, shadings: Sequence[TubeShading], X: BallUnion, spacing: float = 1.0) -> float:
    """
    ``int_X |sum_T Ef_T 1_Y(T)|^2 / (lam R ||f||_2^2)`` with ``lam`` the largest class used.

    Shading indicators are smoothed over one grid cell in ``x3``.
    """
    norm2 = decomp.parent.mass()
    active = [(p, s) for p, s in zip(decomp.packets, shadings) if s.lam is not None]
    if X.is_empty() or norm2 == 0 or not active:
        return 0.0
    points = X.grid_points(spacing)
    total = np.zeros(points.shape[0], dtype=np.complex128)
    for packet, shading in active:
        weight = shading.shading_weight(points, ramp=spacing)
        if np.any(weight):
            total += extend_at(packet.density, points) * weight
    lam = max(s.lam for _, s in active)
    integral = math.fsum((np.abs(total) ** 2).tolist()) * spacing**3
    return integral / (lam * decomp.R * norm2)
