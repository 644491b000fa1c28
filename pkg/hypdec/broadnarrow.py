"""
Broad norms, the pointwise broad-narrow decomposition and dyadic pigeonholing.

The partition ``C_K`` of ``[-1, 1]^2`` is the ``K x K`` grid of squares of side ``2/K``; cell
``(i, j)`` has ``xi``-index ``i`` and ``eta``-index ``j``. A collection of cells is broad when its
centers are ``2/K``-separated in both coordinates, i.e. its cells sit in distinct rows and
distinct columns.
"""
import itertools
import logging
import math
from collections.abc import Hashable, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from .classes.base import InvariantViolation, PreconditionError, Validateable
from .classes.enums import BroadMethod, BroadNarrowTerm, GmoCase
from .field import FreqDensity, SpatialField, extend_at
from .geom import Square
from .utils import dyadic_bucket, is_power_of_two

__all__ = [
    "C_CHECK",
    "BroadInstance",
    "BroadCollection",
    "BroadNarrowResult",
    "GmoResult",
    "PigeonholeResult",
    "cell_squares",
    "cell_labels",
    "broad_value",
    "enumerate_broad",
    "separated_pairs",
    "broad_values",
    "broad_field",
    "broad_narrow_decompose",
    "gmo_case",
    "pigeonhole_select",
]

logger = logging.getLogger(__name__)

C_CHECK = 100.0
"""Largest admissible measured constant of the pointwise broad-narrow inequality."""
EXACT_FIELD_LIMIT = 8
"""Largest ``K`` for which :func:`broad_field` evaluates the exact broad norm."""
_ENUMERATION_CHUNK = 1 << 22

Cell = tuple[int, int]


def cell_squares(K: int) -> list[Square]:
    """Squares of ``C_K`` ordered by ``(i, j)``."""
    side = 2 / K
    return [Square.from_bounds((-1 + i * side, -1 + j * side), side) for i in range(K) for j in range(K)]


def cell_labels(f: FreqDensity, K: int) -> np.ndarray:
    """Flat cell index ``i * K + j`` of every sample of ``f``."""
    xi, eta = f.mesh()
    i = np.clip(np.floor((xi + 1) * K / 2), 0, K - 1).astype(int)
    j = np.clip(np.floor((eta + 1) * K / 2), 0, K - 1).astype(int)
    return i * K + j


@dataclass(frozen=True, eq=False)
class BroadInstance(Validateable):
    """Nonnegative values on the cells of ``C_K`` and a broadness parameter ``A``."""

    K: int
    values: np.ndarray
    A: int
    min_index_gap: int = 1

    def coerce(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))

    def validate(self):
        if not is_power_of_two(self.K) or self.K < 1:
            raise ValueError(f"K must be a power of 2 (got {self.K})")
        if not 1 <= self.A <= self.K * self.K:
            raise ValueError(f"A must lie in [1, K^2] (got {self.A})")
        if self.values.shape != (self.K, self.K):
            raise ValueError(f"values must have shape ({self.K}, {self.K}) (got {self.values.shape})")
        if np.any(self.values < 0) or not np.all(np.isfinite(self.values)):
            raise ValueError("values must be finite and nonnegative")
        if self.min_index_gap < 1:
            raise ValueError(f"min_index_gap must be positive (got {self.min_index_gap})")

    @classmethod
    def from_centers(cls, K: int, values: Mapping[tuple[float, float], float], A: int) -> "BroadInstance":
        """Build an instance from a mapping of cell centers to values."""
        grid = np.zeros((K, K))
        for (xi, eta), value in values.items():
            i = min(K - 1, max(0, math.floor((xi + 1) * K / 2)))
            j = min(K - 1, max(0, math.floor((eta + 1) * K / 2)))
            grid[i, j] = value
        return cls(K, grid, A)


@dataclass(frozen=True)
class BroadCollection(Validateable):
    """Cells with pairwise separated rows and columns."""

    K: int
    cells: tuple[Cell, ...]
    min_index_gap: int = 1

    def validate(self):
        for (i1, j1), (i2, j2) in itertools.combinations(self.cells, 2):
            if abs(i1 - i2) < self.min_index_gap or abs(j1 - j2) < self.min_index_gap:
                raise ValueError(f"cells {(i1, j1)} and {(i2, j2)} are not separated")

    def centers(self) -> list[tuple[float, float]]:
        side = 2 / self.K
        return [(-1 + (i + 0.5) * side, -1 + (j + 0.5) * side) for i, j in self.cells]


def _matching_bound(cells: Sequence[Cell], K: int) -> int:
    if not cells:
        return 0
    rows = [c[0] for c in cells]
    cols = [c[1] for c in cells]
    graph = csr_matrix((np.ones(len(cells)), (rows, cols)), shape=(K, K))
    matching = maximum_bipartite_matching(graph, perm_type="column")
    return int(np.count_nonzero(matching >= 0))


def _separated_selection(cells: Sequence[Cell], K: int, size: int, gap: int) -> tuple[Cell, ...] | None:
    """
    Lexicographically smallest selection of ``size`` separated cells, by branch and bound.

    The bound is the maximum bipartite matching between remaining rows and columns, which ignores
    separation beyond distinctness and so never underestimates.
    """
    ordered = sorted(cells)

    def search(start: int, chosen: list[Cell]) -> tuple[Cell, ...] | None:
        if len(chosen) == size:
            return tuple(chosen)
        last_row = chosen[-1][0] if chosen else -gap
        candidates = [
            c
            for c in ordered[start:]
            if c[0] >= last_row + gap and all(abs(c[1] - j) >= gap for _, j in chosen)
        ]
        if len(chosen) + _matching_bound(candidates, K) < size:
            return None
        for c in candidates:
            found = search(ordered.index(c) + 1, chosen + [c])
            if found is not None:
                return found
        return None

    return search(0, [])


def _exact(inst: BroadInstance) -> tuple[float, BroadCollection]:
    cells = [(i, j) for i in range(inst.K) for j in range(inst.K)]
    if _separated_selection(cells, inst.K, inst.A, inst.min_index_gap) is None:
        return 0.0, BroadCollection(inst.K, (), inst.min_index_gap)
    thresholds = np.unique(inst.values)
    lo, hi = 0, thresholds.size - 1
    best = None
    # feasibility is monotone in the threshold
    while lo <= hi:
        mid = (lo + hi) // 2
        eligible = [c for c in cells if inst.values[c] >= thresholds[mid]]
        witness = _separated_selection(eligible, inst.K, inst.A, inst.min_index_gap)
        if witness is not None:
            best = (float(thresholds[mid]), witness)
            lo = mid + 1
        else:
            hi = mid - 1
    value, witness = best
    return value, BroadCollection(inst.K, witness, inst.min_index_gap)


def _greedy(inst: BroadInstance) -> tuple[float, BroadCollection]:
    order = sorted(((i, j) for i in range(inst.K) for j in range(inst.K)), key=lambda c: (-inst.values[c], c))
    reach = max(1, inst.min_index_gap)
    chosen: list[Cell] = []
    for c in order:
        if all(abs(c[0] - i) > reach and abs(c[1] - j) > reach for i, j in chosen):
            chosen.append(c)
            if len(chosen) == inst.A:
                break
    if len(chosen) < inst.A:
        return 0.0, BroadCollection(inst.K, (), inst.min_index_gap)
    value = min(float(inst.values[c]) for c in chosen)
    return value, BroadCollection(inst.K, tuple(sorted(chosen)), inst.min_index_gap)


def broad_value(inst: BroadInstance, method: BroadMethod = BroadMethod.EXACT) -> tuple[float, BroadCollection]:
    """
    Broad norm ``max over A-broad collections T of min over T of the values``.

    The exact method runs a threshold search over the distinct values with a branch-and-bound
    feasibility test and returns the lexicographically smallest optimal witness. The greedy method
    picks cells by decreasing value, discarding the neighbouring rows and columns of each pick,
    and never exceeds the exact value.

    :param inst: Instance.
    :param method: Exact or greedy.
    :returns: The value and a witness collection; ``(0, empty)`` when no collection of size ``A`` exists.
    """
    match method:
        case BroadMethod.EXACT:
            return _exact(inst)
        case BroadMethod.GREEDY:
            return _greedy(inst)
    raise ValueError(f"unknown broad method (got {method})")


def _transversals(K: int, A: int) -> tuple[np.ndarray, np.ndarray]:
    rows = np.array(list(itertools.combinations(range(K), A)), dtype=int).reshape(-1, A)
    cols = np.array(list(itertools.permutations(range(K), A)), dtype=int).reshape(-1, A)
    return rows, cols


def enumerate_broad(values: np.ndarray, A: int) -> np.ndarray:
    """
    Broad norm by full enumeration of row-and-column distinct collections of size ``A``.

    :param values: Array of shape ``(..., K, K)``.
    :param A: Collection size.
    :returns: Broad norm for each leading index; 0 when ``A > K``.
    """
    values = np.asarray(values, dtype=float)
    K = values.shape[-1]
    lead = values.shape[:-2]
    flat = values.reshape((-1, K, K))
    if A > K:
        return np.zeros(lead)
    rows, cols = _transversals(K, A)
    out = np.empty(flat.shape[0])
    per_point = rows.shape[0] * cols.shape[0] * A
    chunk = max(1, _ENUMERATION_CHUNK // per_point)
    for lo in range(0, flat.shape[0], chunk):
        block = flat[lo : lo + chunk]
        picked = block[:, rows[:, None, :], cols[None, :, :]]
        out[lo : lo + chunk] = picked.min(axis=-1).reshape(block.shape[0], -1).max(axis=-1)
    return out.reshape(lead)


def separated_pairs(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """
    Exact ``Br_2`` and ``max (v1 v2)^(1/2)`` over pairs of cells in distinct rows and columns.

    Cells pairwise sharing a row or a column lie in one row or one column, so any ``K + 1`` cells
    contain a separated pair and both maxima are attained among the ``K + 1`` largest values.

    :param values: Array of shape ``(..., K, K)``.
    :returns: Two arrays of the leading shape; zero when ``K == 1``.
    """
    values = np.asarray(values, dtype=float)
    K = values.shape[-1]
    lead = values.shape[:-2]
    flat = values.reshape((-1, K * K))
    if K == 1:
        return np.zeros(lead), np.zeros(lead)
    top = min(K + 1, K * K)
    idx = np.argpartition(-flat, top - 1, axis=1)[:, :top]
    vals = np.take_along_axis(flat, idx, axis=1)
    rows, cols = idx // K, idx % K
    best_min = np.zeros(flat.shape[0])
    best_product = np.zeros(flat.shape[0])
    for a, b in itertools.combinations(range(top), 2):
        ok = (rows[:, a] != rows[:, b]) & (cols[:, a] != cols[:, b])
        best_min = np.where(ok, np.maximum(best_min, np.minimum(vals[:, a], vals[:, b])), best_min)
        best_product = np.where(ok, np.maximum(best_product, vals[:, a] * vals[:, b]), best_product)
    return best_min.reshape(lead), np.sqrt(best_product).reshape(lead)


def broad_values(values: np.ndarray, A: int) -> np.ndarray:
    """
    Pointwise broad norm of stacked cell values, shape ``(..., K, K)``.

    Exact for ``A <= 2`` at any ``K`` and for ``K <= 8``; greedy otherwise.
    """
    values = np.asarray(values, dtype=float)
    K = values.shape[-1]
    if A == 1:
        return values.max(axis=(-2, -1))
    if A == 2:
        return separated_pairs(values)[0]
    if K <= EXACT_FIELD_LIMIT:
        return enumerate_broad(values, A)
    flat = values.reshape((-1, K, K))
    out = np.array([_greedy(BroadInstance(K, p, A))[0] for p in flat])
    return out.reshape(values.shape[:-2])


def broad_field(fields: Mapping[Cell, SpatialField], A: int, K: int | None = None) -> SpatialField:
    """
    Pointwise broad norm of the moduli of per-cell fields.

    Exact for ``A <= 2`` or ``K <= 8``, greedy otherwise; in the greedy case the gap to the exact
    value is measured on a few grid points and logged.

    :param fields: Field of each cell ``(i, j)``; missing cells count as zero.
    :param A: Broadness parameter.
    :param K: Partition parameter; inferred from the cell indices by default.
    :raises ValueError: if the fields live on different grids.
    """
    reference = next(iter(fields.values()))
    for F in fields.values():
        if not F.same_grid(reference):
            raise ValueError("fields live on different grids")
    if K is None:
        K = 1 << max(max(c) for c in fields).bit_length()
    shape = reference.samples.shape
    stack = np.zeros(shape + (K, K))
    for (i, j), F in fields.items():
        stack[..., i, j] = np.abs(F.samples)
    points = stack.reshape((-1, K, K))
    values = broad_values(points, A)
    if A > 2 and K > EXACT_FIELD_LIMIT:
        subset = points[:: max(1, points.shape[0] // 16)]
        gaps = [_exact(BroadInstance(K, p, A))[0] - _greedy(BroadInstance(K, p, A))[0] for p in subset]
        logger.info(f"greedy broad norm at K={K}: largest measured gap to exact {max(gaps, default=0.0):.3e}")
    return reference.with_samples(values.reshape(shape))


@dataclass(frozen=True, eq=False)
class BroadNarrowResult:
    """
    Terms of the pointwise broad-narrow inequality at each evaluation point.

    ``terms[:, 0]`` is ``K^(5 eps) max |Ef_tau|``, ``terms[:, 1]`` is ``K^(2 eps) max |Ef_S|`` over
    horizontal and vertical strips and ``terms[:, 2]`` is ``K^3 Br_A`` with ``A = ceil(K^eps)``.
    """

    value: np.ndarray
    terms: np.ndarray
    dominating: list[BroadNarrowTerm]
    constant: np.ndarray
    witnesses: list[dict] = field(default_factory=list)


def broad_narrow_decompose(f: FreqDensity, K: int, epsilon: float, points: np.ndarray, c_check: float = C_CHECK) -> BroadNarrowResult:
    """
    Evaluate the three terms of the pointwise broad-narrow inequality.

    At each point the dominating term is the first one at least ``|Ef(x)|``; when none is, the
    largest. The measured constant is ``|Ef(x)|`` divided by the sum of the terms.

    :param f: Density.
    :param K: Partition parameter (power of 2).
    :param epsilon: Exponent.
    :param points: Evaluation points, shape ``(P, 3)``.
    :param c_check: Largest admissible constant.
    :raises InvariantViolation: if a measured constant exceeds ``c_check``.
    """
    if not is_power_of_two(K):
        raise ValueError(f"K must be a power of 2 (got {K})")
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    pieces = extend_at(f, points, cell_labels(f, K), K * K).reshape(K, K, -1)
    total = np.abs(pieces.sum(axis=(0, 1)))
    moduli = np.abs(pieces)
    square_term = K ** (5 * epsilon) * moduli.max(axis=(0, 1))
    rows = np.abs(pieces.sum(axis=1))
    cols = np.abs(pieces.sum(axis=0))
    strip_term = K ** (2 * epsilon) * np.maximum(rows.max(axis=0), cols.max(axis=0))
    A = math.ceil(K**epsilon - 1e-12)
    broad = np.zeros(points.shape[0])
    witnesses = []
    for p in range(points.shape[0]):
        value, witness = broad_value(BroadInstance(K, moduli[:, :, p], min(A, K * K)))
        broad[p] = value
        flat = int(np.argmax(moduli[:, :, p]))
        witnesses.append({"square": divmod(flat, K), "collection": witness.cells})
    terms = np.column_stack([square_term, strip_term, K**3 * broad])
    sums = terms.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        constant = np.where(total == 0, 0.0, total / sums)
    dominating = []
    for p in range(points.shape[0]):
        reached = np.flatnonzero(terms[p] >= total[p])
        index = int(reached[0]) if reached.size else int(np.argmax(terms[p]))
        dominating.append(BroadNarrowTerm(index + 1))
    worst = float(np.max(constant, initial=0.0))
    if worst > c_check:
        logger.error(f"broad-narrow constant {worst} exceeds {c_check} at K={K}")
        raise InvariantViolation(f"broad-narrow constant {worst} exceeds {c_check}")
    return BroadNarrowResult(total, terms, dominating, constant, witnesses)


@dataclass(frozen=True)
class GmoResult:
    """Case of the pointwise dyadic argument at one point, with its witnessing pieces and constant."""

    case: GmoCase
    constant: float
    witness: tuple


def gmo_case(f: FreqDensity, point: Sequence[float], K: int) -> GmoResult:
    """
    Classify a point by the three-case argument behind linear dyadic decoupling.

    Let ``tau1`` maximize ``|Ef_tau(x)|``. If ``|Ef_tau1(x)| >= |Ef(x)| / 100`` the point is
    dominant. Otherwise, if some cell two rows and two columns away from ``tau1`` carries at least
    ``|Ef(x)| / (2 K^2)``, the point is transverse. Otherwise one of the three rows or three
    columns through the neighbours of ``tau1`` (minus those neighbours) carries the point.

    :returns: The case, the measured constant (``|Ef|`` over the case's controlling quantity) and
        the witnessing cells or strip.
    """
    pieces = extend_at(f, np.asarray(point, dtype=float).reshape(1, 3), cell_labels(f, K), K * K)[:, 0].reshape(K, K)
    total = abs(pieces.sum())
    moduli = np.abs(pieces)
    i1, j1 = divmod(int(np.argmax(moduli)), K)
    top = moduli[i1, j1]
    if total == 0 or top >= total / 100:
        return GmoResult(GmoCase.DOMINANT, 0.0 if total == 0 else total / top, ((i1, j1),))
    ii, jj = np.meshgrid(np.arange(K), np.arange(K), indexing="ij")
    far = (np.abs(ii - i1) >= 2) & (np.abs(jj - j1) >= 2)
    big = far & (moduli >= total / (2 * K * K))
    if np.any(big):
        candidates = np.where(big, moduli, -1.0)
        i2, j2 = divmod(int(np.argmax(candidates)), K)
        return GmoResult(GmoCase.TRANSVERSE, total / math.sqrt(top * moduli[i2, j2]), ((i1, j1), (i2, j2)))
    near = (np.abs(ii - i1) <= 1) & (np.abs(jj - j1) <= 1)
    best, witness = 0.0, ()
    for axis, centre in (("row", i1), ("column", j1)):
        for index in range(centre - 1, centre + 2):
            if not 0 <= index < K:
                continue
            strip = (ii == index) if axis == "row" else (jj == index)
            value = abs(pieces[strip & ~near].sum())
            if value > best:
                best, witness = value, (axis, index)
    constant = math.inf if best == 0 else total / best
    return GmoResult(GmoCase.STRIP, constant, witness)


@dataclass(frozen=True)
class PigeonholeResult:
    """Selected index ``lam``, level ``L'`` and sub-collection ``selected`` with the bounds checked."""

    lam: Hashable
    level: float
    selected: list[Hashable]
    levels: int


def pigeonhole_select(I: Mapping[Hashable, float], table: Mapping[tuple[Hashable, Hashable], float], C: float) -> PigeonholeResult:
    """
    Dyadic pigeonholing of a two-index table.

    Given ``I_Q`` in ``[L, 2L]`` and ``I_{Q,lam}`` in ``[A, B]`` with ``I_Q <= C sum_lam I_{Q,lam}``,
    select ``lam``, a dyadic level ``L'`` and a sub-collection ``Q''`` such that:

    * ``#Q'' >= #Q / (levels #Lambda)``,
    * ``I_{Q,lam}`` lies in ``[L', 2L']`` for every ``Q`` in ``Q''``,
    * ``sum over Q'' of I_{Q,lam} >= sum_Q I_Q / (2 C levels #Lambda^2)``,

    where ``levels`` is the number of dyadic buckets meeting ``[A, B]``.

    :raises PreconditionError: if the hypotheses fail.
    :raises InvariantViolation: if a conclusion fails to verify.
    """
    if not I:
        raise PreconditionError("the collection of Q's is empty")
    lams: list[Hashable] = []
    for _, lam in table:
        if lam not in lams:
            lams.append(lam)
    low = min(I.values())
    if low <= 0 or max(I.values()) > 2 * low:
        raise PreconditionError(f"I_Q must lie in [L, 2L] with L > 0 (got range [{low}, {max(I.values())}])")
    if any(v < 0 for v in table.values()):
        raise PreconditionError("table entries must be nonnegative")
    for Q, value in I.items():
        if value > C * math.fsum(table.get((Q, lam), 0.0) for lam in lams) * (1 + 1e-12):
            raise PreconditionError(f"I_Q <= C sum_lam I_(Q,lam) fails at Q={Q!r}")
    positive = [v for v in table.values() if v > 0]
    levels = dyadic_bucket(max(positive)) - dyadic_bucket(min(positive)) + 1

    best_lam = {Q: max(lams, key=lambda lam: (table.get((Q, lam), 0.0), -lams.index(lam))) for Q in I}
    groups = {lam: [Q for Q in I if best_lam[Q] == lam] for lam in lams}
    lam = max(lams, key=lambda lam: (len(groups[lam]), -lams.index(lam)))
    buckets: dict[int, list[Hashable]] = {}
    for Q in groups[lam]:
        buckets.setdefault(dyadic_bucket(table[(Q, lam)]), []).append(Q)
    k = max(buckets, key=lambda k: (len(buckets[k]), k))
    selected = buckets[k]
    level = 2.0**k

    count_q, count_lam = len(I), len(lams)
    checks = [
        len(selected) * levels * count_lam >= count_q,
        all(level <= table[(Q, lam)] <= 2 * level for Q in selected),
        math.fsum(table[(Q, lam)] for Q in selected) * 2 * C * levels * count_lam**2 >= math.fsum(I.values()) * (1 - 1e-12),
    ]
    if not all(checks):
        raise InvariantViolation(f"pigeonholing conclusions failed: {checks}")
    return PigeonholeResult(lam, level, selected, levels)
