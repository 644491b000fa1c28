"""
Densities on ``[-1, 1]^2``, the extension operator and spatial norms.

A :class:`FreqDensity` samples ``f`` at the midpoints ``xi_k = -1 + (k + 1/2) h`` of a uniform grid.
The extension operator is the Riemann sum

    Ef(x) = h^2 sum_k f_k exp(i (x1 xi_k + x2 eta_k + x3 Phi(xi_k, eta_k))),

which is periodic in ``(x1, x2)`` with period ``L = 2 pi / h``. Each ``x3`` slice is evaluated
exactly at ``N`` equispaced points of a period by folding the modulated samples modulo ``N`` and
applying one inverse FFT, for any ``N``. Integrals over the periodized box of trigonometric
polynomials of known bandwidth are therefore exact on coarse grids; see :func:`integrate`.
"""
import logging
import math
from abc import ABC, abstractmethod
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
import scipy.fft
from scipy.spatial import cKDTree

from .classes.base import InvariantViolation, Validateable
from .classes.enums import NormMode, RestrictMode, Surface, VerticalProfile
from .geom import DyadicRect, PlaneRect, Square
from .utils import compensated_sum, worker_count

__all__ = [
    "MAX_SPATIAL_SPACING",
    "X3_STEP",
    "FreqDensity",
    "combine",
    "SpatialField",
    "ExtensionGrid",
    "Region",
    "BallUnion",
    "DecayWeight",
    "WholeBox",
    "phase_function",
    "phase_gradient",
    "grid_size",
    "extend",
    "extend_slice",
    "extend_direct",
    "extend_at",
    "reduce_slices",
    "integrate",
    "torus_counts",
    "lp_norm",
    "restrict_freq",
    "cap_avg_l2",
    "plancherel_ratio",
    "bernstein_ratio",
    "rescale_density",
    "rescaled_points",
]

logger = logging.getLogger(__name__)

MAX_SPATIAL_SPACING = 0.5
"""Largest admissible spatial grid spacing (Nyquist for frequencies in ``[-1, 1]^3``)."""
X3_STEP = 0.5
"""Default spacing of the midpoint rule in the ``x3`` direction."""
DECAY_EXPONENT = 100
"""Exponent of the weight ``(1 + |x - c| / R)^(-DECAY_EXPONENT)``."""
_DIRECT_CHUNK = 1 << 21

FreqRegion = Square | PlaneRect | DyadicRect


def phase_function(surface: Surface) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    """Return the height function ``Phi`` of a graph surface."""
    match surface:
        case Surface.HYPERBOLIC:
            return lambda xi, eta: xi * eta
        case Surface.ELLIPTIC:
            return lambda xi, eta: xi * xi + eta * eta
    raise ValueError(f"unknown surface (got {surface})")


def phase_gradient(surface: Surface, xi: float, eta: float) -> tuple[float, float]:
    """Gradient of ``Phi`` at ``(xi, eta)``."""
    match surface:
        case Surface.HYPERBOLIC:
            return (eta, xi)
        case Surface.ELLIPTIC:
            return (2 * xi, 2 * eta)
    raise ValueError(f"unknown surface (got {surface})")


def grid_size(R: float, fine: bool = False) -> int:
    """
    Smallest even frequency grid size adequate at scale ``R``.

    The grid resolves ``R^(-1/2)`` caps and its period ``pi * n`` holds a box of side ``2R``
    with margin. With ``fine`` the spacing is also at most ``1/R``.
    """
    n = max(math.ceil(4 * math.sqrt(R)), math.ceil(2 * R / math.pi) + 4)
    if fine:
        n = max(n, math.ceil(2 * R))
    return n + (n % 2)


@dataclass(frozen=True, eq=False)
class FreqDensity(Validateable):
    """
    Complex density sampled on the midpoint grid of ``[-1, 1]^2``.

    ``samples[i, j]`` sits at ``(xi, eta)`` with global indices ``offset + (i, j)``. Packets of
    a wave packet decomposition use a nonzero offset and may extend past the unit square.
    """

    samples: np.ndarray
    surface: Surface = Surface.HYPERBOLIC
    thickness: float | None = None
    profile: VerticalProfile = VerticalProfile.GAUSSIAN
    offset: tuple[int, int] = (0, 0)
    spacing: float | None = None

    def coerce(self):
        samples = np.asarray(self.samples, dtype=np.complex128)
        object.__setattr__(self, "samples", samples)
        if self.spacing is None:
            if samples.ndim != 2 or samples.shape[0] != samples.shape[1]:
                raise ValueError(f"spacing is required for non-square sample arrays (got shape {samples.shape})")
            object.__setattr__(self, "spacing", 2.0 / samples.shape[0])
        object.__setattr__(self, "offset", (int(self.offset[0]), int(self.offset[1])))

    def validate(self):
        if self.samples.ndim != 2 or 0 in self.samples.shape:
            raise ValueError(f"samples must be a nonempty matrix (got shape {self.samples.shape})")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("samples must be finite")
        if not self.spacing > 0:
            raise ValueError(f"spacing must be positive (got {self.spacing})")
        if self.thickness is not None and not self.thickness > 0:
            raise ValueError(f"thickness must be positive (got {self.thickness})")

    @classmethod
    def zeros(cls, n: int, surface: Surface = Surface.HYPERBOLIC) -> "FreqDensity":
        return cls(np.zeros((n, n), dtype=np.complex128), surface)

    @classmethod
    def ones(cls, n: int, surface: Surface = Surface.HYPERBOLIC) -> "FreqDensity":
        return cls(np.ones((n, n), dtype=np.complex128), surface)

    @classmethod
    def from_function(cls, fn: Callable[[np.ndarray, np.ndarray], np.ndarray], n: int, surface: Surface = Surface.HYPERBOLIC) -> "FreqDensity":
        """Sample ``fn(xi, eta)`` on the ``n x n`` midpoint grid."""
        axis = -1 + (np.arange(n) + 0.5) * (2.0 / n)
        xi, eta = np.meshgrid(axis, axis, indexing="ij")
        return cls(np.broadcast_to(fn(xi, eta), (n, n)).astype(np.complex128), surface)

    @property
    def n(self) -> int:
        """Size of the global grid of ``[-1, 1]^2``."""
        return round(2 / self.spacing)

    @property
    def period(self) -> float:
        """Spatial period ``2 pi / h`` of the Riemann-sum extension."""
        return 2 * math.pi / self.spacing

    @property
    def xi_axis(self) -> np.ndarray:
        return -1 + (self.offset[0] + np.arange(self.samples.shape[0]) + 0.5) * self.spacing

    @property
    def eta_axis(self) -> np.ndarray:
        return -1 + (self.offset[1] + np.arange(self.samples.shape[1]) + 0.5) * self.spacing

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.xi_axis, self.eta_axis, indexing="ij")

    def height(self) -> np.ndarray:
        xi, eta = self.mesh()
        return phase_function(self.surface)(xi, eta)

    def mass(self) -> float:
        """Squared L2 norm ``h^2 sum |f_k|^2``."""
        return compensated_sum(np.abs(self.samples) ** 2) * self.spacing**2

    def l2_norm(self) -> float:
        return math.sqrt(self.mass())

    def lp_norm(self, p: float) -> float:
        return (compensated_sum(np.abs(self.samples) ** p) * self.spacing**2) ** (1 / p)

    def resolves(self, R: float) -> bool:
        """Check whether the grid resolves caps of side ``R^(-1/2)``."""
        return self.spacing <= 1 / (2 * math.sqrt(R)) + 1e-15

    def is_zero(self) -> bool:
        return not np.any(self.samples)

    def with_samples(self, samples: np.ndarray, offset: tuple[int, int] | None = None) -> "FreqDensity":
        return replace(self, samples=samples, offset=self.offset if offset is None else offset)

    def scaled(self, factor: complex) -> "FreqDensity":
        return self.with_samples(self.samples * factor)

    def support_window(self) -> tuple[tuple[int, int], tuple[int, int]] | None:
        """
        Bounding window of the nonzero samples.

        :returns: Inclusive global index ranges ``((i0, i1), (j0, j1))``, or `None` for the zero density.
        """
        nonzero = self.samples != 0
        rows = np.flatnonzero(nonzero.any(axis=1))
        if rows.size == 0:
            return None
        cols = np.flatnonzero(nonzero.any(axis=0))
        return (
            (self.offset[0] + int(rows[0]), self.offset[0] + int(rows[-1])),
            (self.offset[1] + int(cols[0]), self.offset[1] + int(cols[-1])),
        )

    def trimmed(self) -> "FreqDensity":
        """Same density stored on the bounding window of its support."""
        window = self.support_window()
        if window is None:
            return self.with_samples(np.zeros((1, 1), dtype=np.complex128))
        (i0, i1), (j0, j1) = window
        local = self.samples[i0 - self.offset[0] : i1 - self.offset[0] + 1, j0 - self.offset[1] : j1 - self.offset[1] + 1]
        return self.with_samples(local, (i0, j0))

    def embedded(self) -> "FreqDensity":
        """Same density on the full ``n x n`` grid; samples outside ``[-1, 1]^2`` are dropped."""
        n = self.n
        out = np.zeros((n, n), dtype=np.complex128)
        rows = self.offset[0] + np.arange(self.samples.shape[0])
        cols = self.offset[1] + np.arange(self.samples.shape[1])
        rmask = (rows >= 0) & (rows < n)
        cmask = (cols >= 0) & (cols < n)
        out[np.ix_(rows[rmask], cols[cmask])] = self.samples[np.ix_(rmask, cmask)]
        return self.with_samples(out, (0, 0))

    def __add__(self, other: "FreqDensity") -> "FreqDensity":
        return combine([self, other])


def combine(densities: Sequence[FreqDensity]) -> FreqDensity:
    """
    Sum densities living on the same grid, on the union of their windows.

    :raises ValueError: if the densities use different spacings or surfaces.
    """
    first = densities[0]
    for d in densities[1:]:
        if not math.isclose(d.spacing, first.spacing, rel_tol=1e-12) or d.surface != first.surface:
            raise ValueError("densities live on different grids")
    i0 = min(d.offset[0] for d in densities)
    j0 = min(d.offset[1] for d in densities)
    i1 = max(d.offset[0] + d.samples.shape[0] for d in densities)
    j1 = max(d.offset[1] + d.samples.shape[1] for d in densities)
    out = np.zeros((i1 - i0, j1 - j0), dtype=np.complex128)
    for d in densities:
        a, b = d.offset[0] - i0, d.offset[1] - j0
        out[a : a + d.samples.shape[0], b : b + d.samples.shape[1]] += d.samples
    return first.with_samples(out, (i0, j0))


def _profile_multiplier(f: FreqDensity, x3: float) -> float:
    if f.thickness is None:
        return 1.0
    t = f.thickness * x3
    match f.profile:
        case VerticalProfile.GAUSSIAN:
            return math.exp(-t * t / 2)
        case VerticalProfile.BOX:
            return 1.0 if t == 0 else math.sin(t / 2) / (t / 2)
    raise ValueError(f"unknown vertical profile (got {f.profile})")


@dataclass(frozen=True, eq=False)
class SpatialField(Validateable):
    """Samples of ``Ef`` on a cubic grid of spacing ``spacing`` centered at ``center``."""

    samples: np.ndarray
    spacing: float
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    R: float = 1.0

    def coerce(self):
        object.__setattr__(self, "samples", np.asarray(self.samples))
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    def validate(self):
        if self.samples.ndim != 3:
            raise ValueError(f"samples must be a 3D array (got {self.samples.ndim} dimensions)")
        if not 0 < self.spacing <= MAX_SPATIAL_SPACING + 1e-12:
            raise InvariantViolation(f"spatial spacing must be in (0, {MAX_SPATIAL_SPACING}] (got {self.spacing})")

    @property
    def axes(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return tuple(
            c + (np.arange(m) - (m - 1) / 2) * self.spacing for c, m in zip(self.center, self.samples.shape)
        )

    def coordinates(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return np.meshgrid(*self.axes, indexing="ij")

    @property
    def bounds(self) -> list[tuple[float, float]]:
        return [(float(a[0]), float(a[-1])) for a in self.axes]

    def same_grid(self, other: "SpatialField") -> bool:
        return (
            self.samples.shape == other.samples.shape
            and math.isclose(self.spacing, other.spacing, rel_tol=1e-12)
            and np.allclose(self.center, other.center, rtol=0, atol=1e-12)
        )

    def with_samples(self, samples: np.ndarray) -> "SpatialField":
        return replace(self, samples=samples)


@dataclass(frozen=True)
class ExtensionGrid:
    """
    Box on which :func:`extend` samples ``Ef``.

    ``half_width`` defaults to ``R``; ``padding`` is the ratio of FFT length to frequency grid
    size and defaults to ``2 pi``, the smallest value keeping the spacing at most 1/2.
    """

    half_width: float | None = None
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    padding: float = 2 * math.pi


class Region(ABC):
    """Integration region or weight for spatial norms."""

    @abstractmethod
    def weights(self, x1: np.ndarray, x2: np.ndarray, x3: np.ndarray) -> np.ndarray:
        """Weight of each point; indicator regions return 0/1 values."""
        pass

    def is_empty(self) -> bool:
        return False

    def check_inside(self, bounds: Sequence[tuple[float, float]], spacing: float):
        """
        Check that the region lies inside a sampled box.

        :raises InvariantViolation: if the region escapes the box.
        """
        pass


@dataclass(frozen=True, eq=False)
class BallUnion(Region):
    """Union of closed balls of a common radius."""

    centers: np.ndarray
    radius: float

    def __post_init__(self):
        centers = np.asarray(self.centers, dtype=float).reshape(-1, 3)
        object.__setattr__(self, "centers", centers)
        if not self.radius > 0:
            raise ValueError(f"radius must be positive (got {self.radius})")

    def is_empty(self) -> bool:
        return self.centers.shape[0] == 0

    def is_disjoint(self) -> bool:
        """Check whether the balls are pairwise disjoint."""
        if self.centers.shape[0] < 2:
            return True
        tree = cKDTree(self.centers)
        return not tree.query_pairs(2 * self.radius * (1 - 1e-12))

    def contains(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        inside = np.zeros(points.shape[:-1], dtype=bool)
        for c in self.centers:
            inside |= np.sum((points - c) ** 2, axis=-1) <= self.radius**2
        return inside

    def weights(self, x1, x2, x3):
        return self.contains(np.stack(np.broadcast_arrays(x1, x2, x3), axis=-1)).astype(float)

    def check_inside(self, bounds, spacing):
        for c in self.centers:
            for k, (lo, hi) in enumerate(bounds):
                if c[k] - self.radius < lo - spacing / 2 or c[k] + self.radius > hi + spacing / 2:
                    raise InvariantViolation(f"ball at {tuple(c)} with radius {self.radius} escapes the grid box")

    def grid_points(self, spacing: float) -> np.ndarray:
        """Points of the lattice ``spacing * (Z^3 + 1/2)`` shifted to each center, inside the balls."""
        m = math.ceil(self.radius / spacing)
        axis = (np.arange(-m, m) + 0.5) * spacing
        offsets = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), axis=-1).reshape(-1, 3)
        offsets = offsets[np.sum(offsets**2, axis=1) <= self.radius**2]
        if self.is_empty():
            return np.zeros((0, 3))
        return (self.centers[:, None, :] + offsets[None, :, :]).reshape(-1, 3)


@dataclass(frozen=True)
class DecayWeight(Region):
    """The weight ``(1 + |x - center| / R)^(-100)`` concentrated on ``B_R``."""

    center: tuple[float, float, float]
    R: float

    def weights(self, x1, x2, x3):
        c1, c2, c3 = self.center
        dist = np.sqrt((x1 - c1) ** 2 + (x2 - c2) ** 2 + (x3 - c3) ** 2)
        return (1 + dist / self.R) ** (-DECAY_EXPONENT)


@dataclass(frozen=True)
class WholeBox(Region):
    """Every sample with weight 1."""

    def weights(self, x1, x2, x3):
        return np.ones(np.broadcast(x1, x2, x3).shape)


def _fold(values: np.ndarray, indices: np.ndarray, count: int, axis: int) -> np.ndarray:
    values = np.moveaxis(values, axis, 0)
    out = np.zeros((count,) + values.shape[1:], dtype=values.dtype)
    wrapped = indices % count
    if indices.size <= count:
        out[wrapped] = values
    else:
        np.add.at(out, wrapped, values)
    return np.moveaxis(out, 0, axis)


def extend_slice(
    f: FreqDensity,
    x3: float,
    counts: tuple[int, int],
    start: tuple[float, float] = (0.0, 0.0),
    workers: int = 1,
) -> np.ndarray:
    """
    Evaluate ``Ef(., ., x3)`` exactly on ``counts`` equispaced points per period.

    Point ``(m1, m2)`` is ``start + (m1, m2) * L / counts`` with ``L = 2 pi / h``.

    :param f: Density.
    :param x3: Height of the slice.
    :param counts: Number of points per period along ``x1`` and ``x2``.
    :param start: Coordinates of the first point.
    :param workers: Worker count passed to :func:`scipy.fft.ifft2`.
    :returns: Complex array of shape ``counts``.
    """
    trimmed = f.trimmed()
    h = f.spacing
    xi0 = -1 + h / 2
    k1 = trimmed.offset[0] + np.arange(trimmed.samples.shape[0])
    k2 = trimmed.offset[1] + np.arange(trimmed.samples.shape[1])
    g = trimmed.samples * np.exp(1j * x3 * trimmed.height())
    g = g * np.exp(1j * start[0] * k1 * h)[:, None] * np.exp(1j * start[1] * k2 * h)[None, :]
    folded = _fold(_fold(g, k1, counts[0], 0), k2, counts[1], 1)
    out = scipy.fft.ifft2(folded, workers=workers) * (counts[0] * counts[1] * h * h)
    step1 = 2 * math.pi / (counts[0] * h)
    step2 = 2 * math.pi / (counts[1] * h)
    out *= np.exp(1j * (start[0] + np.arange(counts[0]) * step1) * xi0)[:, None]
    out *= np.exp(1j * (start[1] + np.arange(counts[1]) * step2) * xi0)[None, :]
    return out * _profile_multiplier(f, x3)


def _box_layout(f: FreqDensity, R: float, grid: ExtensionGrid) -> tuple[int, float, int]:
    if not f.resolves(R):
        raise InvariantViolation(f"density spacing {f.spacing} does not resolve caps at R={R}")
    count = scipy.fft.next_fast_len(math.ceil(grid.padding * f.n))
    spacing = f.period / count
    if spacing > MAX_SPATIAL_SPACING * (1 + 1e-12):
        raise InvariantViolation(f"spatial grid too coarse (spacing {spacing} > {MAX_SPATIAL_SPACING})")
    half_width = R if grid.half_width is None else grid.half_width
    half_count = math.floor(half_width / spacing + 1e-9)
    if 2 * half_count + 1 > count or half_width + spacing > f.period / 2:
        raise InvariantViolation(f"box of half width {half_width} exceeds the period {f.period} of the grid")
    return count, spacing, half_count


def reduce_slices(
    densities: Sequence[FreqDensity],
    R: float,
    reducer: Callable[[float, np.ndarray, np.ndarray, list[np.ndarray]], float],
    grid: ExtensionGrid | None = None,
) -> float:
    """
    Stream ``x3`` slices of several extensions through a reducer and sum the results.

    The reducer receives ``(x3, x1_axis, x2_axis, slices)`` and returns a number; slices are
    evaluated in parallel and the results summed exactly, so the outcome does not depend on the
    worker count.

    :returns: The compensated sum of the reducer values.
    """
    grid = grid or ExtensionGrid()
    count, spacing, half_count = _box_layout(densities[0], R, grid)
    c1, c2, c3 = grid.center
    offsets = (np.arange(2 * half_count + 1) - half_count) * spacing
    x1_axis, x2_axis = c1 + offsets, c2 + offsets
    start = (c1 - half_count * spacing, c2 - half_count * spacing)
    size = 2 * half_count + 1

    def one_slice(x3: float) -> float:
        slices = [extend_slice(d, x3, (count, count), start)[:size, :size] for d in densities]
        return reducer(x3, x1_axis, x2_axis, slices)

    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        values = list(pool.map(one_slice, c3 + offsets))
    return compensated_sum(values)


def extend(f: FreqDensity, R: float, grid: ExtensionGrid | None = None) -> SpatialField:
    """
    Evaluate ``Ef`` on a cubic grid by slice FFTs.

    :param f: Density resolving caps at scale ``R``.
    :param R: Scale; the default box is ``[-R, R]^3``.
    :param grid: Box placement and FFT padding.
    :returns: The sampled field.
    :raises InvariantViolation: if the grid is too coarse or the box exceeds the period.
    """
    grid = grid or ExtensionGrid()
    count, spacing, half_count = _box_layout(f, R, grid)
    c1, c2, c3 = grid.center
    offsets = (np.arange(2 * half_count + 1) - half_count) * spacing
    start = (c1 - half_count * spacing, c2 - half_count * spacing)
    size = 2 * half_count + 1
    logger.debug(f"extending {f.samples.shape} density on {size}^3 grid (fft length {count})")

    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        slices = list(pool.map(lambda x3: extend_slice(f, x3, (count, count), start)[:size, :size], c3 + offsets))
    return SpatialField(np.stack(slices, axis=-1), spacing, grid.center, R)


def extend_at(f: FreqDensity, points: np.ndarray, labels: np.ndarray | None = None, label_count: int | None = None) -> np.ndarray:
    """
    Evaluate ``Ef`` or its pieces at arbitrary points by direct summation.

    :param f: Density.
    :param points: Array of shape ``(P, 3)``.
    :param labels: Optional integer label per sample (same shape as ``f.samples``); samples
        labelled ``-1`` are ignored. When given, the extension of each labelled piece is returned.
    :param label_count: Number of labels; defaults to ``labels.max() + 1``.
    :returns: Shape ``(P,)`` without labels, ``(label_count, P)`` with labels.
    """
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    xi, eta = f.mesh()
    height = f.height()
    mask = f.samples != 0
    if labels is not None:
        mask &= labels >= 0
        count = int(labels.max()) + 1 if label_count is None else label_count
    weights = f.samples[mask] * f.spacing**2
    freqs = np.stack([xi[mask], eta[mask], height[mask]], axis=1)
    if labels is not None:
        onehot = np.zeros((weights.size, count), dtype=np.complex128)
        onehot[np.arange(weights.size), labels[mask]] = weights
        out = np.zeros((count, points.shape[0]), dtype=np.complex128)
    else:
        out = np.zeros(points.shape[0], dtype=np.complex128)
    if weights.size == 0 or points.shape[0] == 0:
        return out
    chunk = max(1, _DIRECT_CHUNK // weights.size)
    for lo in range(0, points.shape[0], chunk):
        block = points[lo : lo + chunk]
        phase = np.exp(1j * (block @ freqs.T))
        profile = np.array([_profile_multiplier(f, x3) for x3 in block[:, 2]]) if f.thickness is not None else 1.0
        if labels is None:
            out[lo : lo + chunk] = (phase @ weights) * profile
        else:
            out[:, lo : lo + chunk] = (phase @ onehot).T * profile
    return out


def extend_direct(f: FreqDensity, points: np.ndarray) -> np.ndarray:
    """Brute-force Riemann-sum evaluation of ``Ef`` at the given points."""
    return extend_at(f, points)


def torus_counts(densities: Sequence[FreqDensity], multiplicity: int) -> tuple[int, int]:
    """
    FFT lengths making torus integrals exact.

    An integrand that is a product of ``multiplicity`` factors ``Ef_j`` or their conjugates
    (each density counted ``multiplicity`` times) is a trigonometric polynomial whose frequency
    span is ``multiplicity`` times the sum of the support spans; one more sample than that span
    integrates it exactly.
    """
    spans = [0, 0]
    for d in densities:
        window = d.support_window()
        if window is None:
            continue
        for axis in (0, 1):
            spans[axis] += window[axis][1] - window[axis][0]
    return tuple(scipy.fft.next_fast_len(multiplicity * s + 1) for s in spans)


def _x3_nodes(R: float, step: float) -> tuple[np.ndarray, float]:
    count = max(1, math.ceil(2 * R / step))
    dx3 = 2 * R / count
    return -R + (np.arange(count) + 0.5) * dx3, dx3


def integrate(
    densities: Sequence[FreqDensity],
    integrand: Callable[..., np.ndarray],
    R: float,
    mode: NormMode = NormMode.TORUS,
    multiplicity: int = 2,
    x3_step: float = X3_STEP,
    counts: tuple[int, int] | None = None,
) -> float:
    """
    Integrate a function of several extensions over ``x3`` in ``[-R, R]``.

    In torus mode the ``(x1, x2)`` integral runs over one period and is exact for polynomial
    integrands of the given ``multiplicity`` (see :func:`torus_counts`). In weighted mode the
    integrand is multiplied by the ``w_{B_R}`` weight and sampled on a grid of spacing at most 1/2
    over ``[-R, R]^2``.

    :param densities: Densities on a common grid.
    :param integrand: Called with one complex slice per density, returns real values.
    :param R: Scale.
    :param mode: Torus or weighted.
    :param multiplicity: Polynomial degree of the integrand, as used by :func:`torus_counts`.
    :param x3_step: Spacing of the ``x3`` midpoint rule.
    :param counts: Explicit FFT lengths overriding :func:`torus_counts`.
    :returns: The integral.
    """
    if all(d.is_zero() for d in densities):
        return 0.0
    nodes, dx3 = _x3_nodes(R, x3_step)
    h = densities[0].spacing
    period = 2 * math.pi / h
    if mode == NormMode.TORUS:
        counts = counts or torus_counts(densities, multiplicity)
        area = (period / counts[0]) * (period / counts[1])

        def one_slice(x3: float) -> float:
            return compensated_sum(integrand(*[extend_slice(d, x3, counts) for d in densities]))

        with ThreadPoolExecutor(max_workers=worker_count()) as pool:
            values = list(pool.map(one_slice, nodes))
        return compensated_sum(values) * area * dx3

    weight = DecayWeight((0.0, 0.0, 0.0), R)
    count = scipy.fft.next_fast_len(math.ceil(period / MAX_SPATIAL_SPACING))
    spacing = period / count
    half_count = min(math.floor(R / spacing), (count - 1) // 2)
    size = 2 * half_count + 1
    start = (-half_count * spacing, -half_count * spacing)
    axis = start[0] + np.arange(size) * spacing
    x1, x2 = np.meshgrid(axis, axis, indexing="ij")

    def one_weighted(x3: float) -> float:
        slices = [extend_slice(d, x3, (count, count), start)[:size, :size] for d in densities]
        return compensated_sum(integrand(*slices) * weight.weights(x1, x2, x3))

    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        values = list(pool.map(one_weighted, nodes))
    return compensated_sum(values) * spacing * spacing * dx3


def lp_norm(F: SpatialField, p: float, region: Region) -> float:
    """
    Riemann-sum ``L^p`` norm of a sampled field over a region or against a weight.

    :param F: Sampled field.
    :param p: Exponent, at least 1.
    :param region: Indicator region or weight.
    :returns: ``(sum w |F|^p spacing^3)^(1/p)``.
    :raises InvariantViolation: if the region escapes the field box.
    """
    if not 1 <= p < math.inf:
        raise ValueError(f"p must lie in [1, inf) (got {p})")
    if region.is_empty():
        return 0.0
    region.check_inside(F.bounds, F.spacing)
    weights = region.weights(*F.coordinates())
    total = compensated_sum(weights * np.abs(F.samples) ** p) * F.spacing**3
    return total ** (1 / p)


def restrict_freq(f: FreqDensity, region: FreqRegion, mode: RestrictMode = RestrictMode.SHARP) -> FreqDensity:
    """
    Localize a density to a frequency region.

    Sharp mode multiplies by the indicator of the half-open region; smooth mode by the region's
    partition-of-unity bump, supported in 1.5 times the region.
    """
    xi, eta = f.mesh()
    match mode:
        case RestrictMode.SHARP:
            factor = region.contains(xi, eta)
        case RestrictMode.SMOOTH:
            factor = region.bump(xi, eta)
        case _:
            raise ValueError(f"unknown restriction mode (got {mode})")
    return f.with_samples(f.samples * factor)


def cap_avg_l2(f: FreqDensity, theta: Square) -> float:
    """
    Averaged L2 norm ``(|theta|^-1 ||f 1_theta||_2^2)^(1/2)``.

    :raises ValueError: for a degenerate square.
    """
    if not theta.side > 0:
        raise ValueError(f"degenerate square (got side {theta.side})")
    xi, eta = f.mesh()
    mass = compensated_sum(np.abs(f.samples[theta.contains(xi, eta)]) ** 2) * f.spacing**2
    return math.sqrt(mass / theta.area)


def plancherel_ratio(f: FreqDensity, R: float) -> float:
    """``||Ef||^2`` over the periodized box times ``[-R, R]``, divided by ``R ||f||_2^2``."""
    mass = f.mass()
    if mass == 0:
        return 0.0
    return integrate([f], lambda F: np.abs(F) ** 2, R, multiplicity=2) / (R * mass)


def bernstein_ratio(f: FreqDensity, R: float, p: int = 4) -> float:
    """
    ``||Ef||_p / ||Ef||_2`` over the periodized box, normalized by ``R^(2 (1/p - 1/2))``.

    Bounded for single wave packets at scale ``R``. Only even ``p`` is supported, so the torus
    integrals are exact.
    """
    if p % 2 or p < 2:
        raise ValueError(f"p must be an even integer (got {p})")
    lp = integrate([f], lambda F: np.abs(F) ** p, R, multiplicity=p) ** (1 / p)
    l2 = integrate([f], lambda F: np.abs(F) ** 2, R, multiplicity=2) ** 0.5
    if l2 == 0:
        return 0.0
    return lp / l2 / R ** (2 * (1 / p - 1 / 2))


def _grid_aligned(value: float, spacing: float) -> int:
    index = value / spacing
    if abs(index - round(index)) > 1e-9:
        raise ValueError(f"square edge {value} is not on the grid of spacing {spacing}")
    return round(index)


def rescale_density(f: FreqDensity, tau: Square) -> FreqDensity:
    """
    Re-express the part of ``f`` on a grid-aligned square as a density on ``[-1, 1]^2``.

    With ``d = side / 2`` and ``c`` the center, ``Ef_tau(x) = d^2 exp(i (x1 c1 + x2 c2 + x3 c1 c2)) Eg(A x)``
    where ``g`` is the returned density and ``A`` is given by :func:`rescaled_points`.
    """
    if f.surface != Surface.HYPERBOLIC:
        raise ValueError("rescaling is only defined for the hyperbolic surface")
    i0 = _grid_aligned(tau.lo[0] + 1, f.spacing) - f.offset[0]
    j0 = _grid_aligned(tau.lo[1] + 1, f.spacing) - f.offset[1]
    m = _grid_aligned(tau.side, f.spacing)
    window = np.zeros((m, m), dtype=np.complex128)
    rows = np.arange(i0, i0 + m)
    cols = np.arange(j0, j0 + m)
    rmask = (rows >= 0) & (rows < f.samples.shape[0])
    cmask = (cols >= 0) & (cols < f.samples.shape[1])
    window[np.ix_(rmask, cmask)] = f.samples[np.ix_(rows[rmask], cols[cmask])]
    return FreqDensity(window, f.surface, f.thickness, f.profile)


def rescaled_points(points: np.ndarray, tau: Square) -> tuple[np.ndarray, np.ndarray]:
    """
    Spatial counterpart of :func:`rescale_density`.

    :returns: The mapped points and the complex factor relating the two extensions at each point.
    """
    points = np.asarray(points, dtype=float)
    d = tau.side / 2
    c1, c2 = tau.center
    x1, x2, x3 = points[..., 0], points[..., 1], points[..., 2]
    mapped = np.stack([d * (x1 + c2 * x3), d * (x2 + c1 * x3), d * d * x3], axis=-1)
    factor = d * d * np.exp(1j * (x1 * c1 + x2 * c2 + x3 * c1 * c2))
    return mapped, factor
