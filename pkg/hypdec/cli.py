"""
Experiment runner: configuration, scenario registry, report emission and the acceptance suite.

Every scenario runs a number of trials at each scale of the configuration. A trial draws its
inputs from a counter-based generator keyed by ``(seed, scenario, scale, trial)`` and returns
CSV rows plus named invariant checks; trials fan out to a thread pool and are assembled in a
fixed order, so reports do not depend on the worker count.
"""
import argparse
import configparser
import logging
import math
import sys
import time
import zlib
from collections import Counter
from collections.abc import Callable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import numpy as np
from numpy.random import Generator, Philox, SeedSequence

from .broadnarrow import (
    C_CHECK,
    EXACT_FIELD_LIMIT,
    BroadInstance,
    broad_narrow_decompose,
    broad_value,
    broad_values,
    enumerate_broad,
    gmo_case,
    pigeonhole_select,
    separated_pairs,
)
from .classes.base import ConjectureViolation, InvariantViolation, Validateable
from .classes.enums import (
    BroadMethod,
    BroadNarrowTerm,
    CriterionStatus,
    DilationAxis,
    EnsembleKind,
    ExitCode,
    FamilyKind,
    GmoCase,
    SquareFunctionMode,
)
from .classes.reports import RatioReport
from .decouple import (
    Ensemble,
    bilinear_l2_ratio,
    bilinear_restriction_2d,
    classify_narrow_broad,
    dirichlet_ratio,
    generate,
    linear_dyadic_ratio,
    refined_ratio,
    segment_density,
    square_function_ratio,
)
from .exporter import container
from .exporter.families import read_family
from .exporter.images import save_slice
from .exporter.reports import git_describe, plot_growth, write_rows, write_summary, write_tubes
from .field import (
    X3_STEP,
    BallUnion,
    ExtensionGrid,
    FreqDensity,
    SpatialField,
    extend,
    extend_direct,
    grid_size,
)
from .geom import DEFAULT_BAND, Square, hyperbolic_rescale, nonisotropic_dilate
from .incidence import (
    LineFamily,
    Shading,
    brush_family,
    bush_family,
    full_shading,
    furstenberg_ratio,
    parallel_family,
    prune_multiplicity,
    pruning_mu,
    random_family,
    random_shading,
    two_ends_check,
    two_ends_oracle,
)
from .restriction import A_COUPLING, CRITICAL_P, K_COUPLING, broad_restriction_ratio, restriction_ratio
from .utils import fit_exponent, is_power_of_two, parse_band, parse_criterion_scales, parse_pair, parse_scales, worker_count
from .wavepacket import PacketKernel, Tube, decompose, direction_separation, frequency_leakage, tail_ratio

__all__ = [
    "ExperimentConfig",
    "TrialOutcome",
    "Scenario",
    "SCENARIOS",
    "SUBCOMMANDS",
    "RunResult",
    "CriterionResult",
    "VerifySummary",
    "make_rng",
    "run",
    "verify_all",
    "build_parser",
    "config_from_args",
    "configure_logging",
    "main",
]

logger = logging.getLogger(__name__)

COUPLINGS = {
    "K1": "R^(eps^6)",
    "K2": "R^(eps^4)",
    "K3": "R^(eps^2)",
    "K": K_COUPLING,
    "A": A_COUPLING,
}
"""Symbolic coupling of each partition parameter to the scale."""
EXPERIMENT_SECTION = "experiment"
DEFAULT_BUDGET = 30.0
"""Default time budget of :func:`verify_all`, in minutes."""
FULL_SQUARE = Square((0.0, 0.0), 2.0)

BUSH_LINES = 64
BRUSH_LINES = 16
PARALLEL_SIDE = 8
RANDOM_LINES = 32
BROAD_BOX = 8.0
"""Half width of the 9^3 grid on which the broad-narrow terms are evaluated."""


# ---------------------------------------------------------------------------------------------
# configuration


def _optional(convert: Callable[[str], Any]) -> Callable[[str], Any]:
    def parse(value: str) -> Any:
        return None if value.strip() in ("", "none") else convert(value)

    return parse


def _boolean(value: str) -> bool:
    try:
        return configparser.ConfigParser.BOOLEAN_STATES[value.strip().lower()]
    except KeyError as e:
        raise ValueError(f"not a boolean (got {value!r})") from e


def _config_keys() -> dict[str, Callable[[str], Any]]:
    return {
        "scenario": str.strip,
        "scales": _optional(lambda v: tuple(parse_scales(v))),
        "seed": int,
        "trials": int,
        "epsilon": float,
        "epsilon0": float,
        "ensemble": str.strip,
        "band": parse_band,
        "out": Path,
        "k": _optional(int),
        "k1": _optional(int),
        "k2": _optional(float),
        "k3": _optional(float),
        "a": _optional(int),
        "p": float,
        "delta": _optional(float),
        "grid_padding": float,
        "x3_step": float,
        "family": _optional(Path),
        "save_inputs": _boolean,
    }


@dataclass(frozen=True)
class ExperimentConfig(Validateable):
    """
    Parameters of one experiment run.

    ``scales`` defaults to the scenario's desk scales. ``k``, ``k1``, ``k2``, ``k3`` and ``a``
    are effective integer values of the partition parameters; reports carry them next to their
    symbolic couplings (see :data:`COUPLINGS`). ``ensemble`` is a comma separated list of
    ensemble kinds, or of line family generators for the incidence scenarios.
    """

    scenario: str
    scales: tuple[int, ...] | None = None
    seed: int = 0
    trials: int = 1
    epsilon: float = 0.1
    epsilon0: float = 0.0
    ensemble: str = ""
    band: tuple[float, float] = DEFAULT_BAND
    out: Path = Path("out")
    k: int | None = None
    k1: int | None = None
    k2: float | None = None
    k3: float | None = None
    a: int | None = None
    p: float = CRITICAL_P
    delta: float | None = None
    grid_padding: float = 2 * math.pi
    x3_step: float = X3_STEP
    family: Path | None = None
    save_inputs: bool = False

    def coerce(self):
        if self.scales is not None:
            object.__setattr__(self, "scales", tuple(int(R) for R in self.scales))
        object.__setattr__(self, "band", tuple(float(b) for b in self.band))
        object.__setattr__(self, "out", Path(self.out))

    def validate(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario (got {self.scenario!r})")
        if self.scales is not None:
            if not self.scales:
                raise ValueError("scale list is empty")
            for R in self.scales:
                if not is_power_of_two(R) or R < 1:
                    raise ValueError(f"scales must be powers of 2 (got {R})")
            if list(self.scales) != sorted(set(self.scales)):
                raise ValueError(f"scales must be sorted ascending without repeats (got {list(self.scales)})")
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer (got {self.seed})")
        if self.trials < 1:
            raise ValueError(f"trials must be positive (got {self.trials})")
        if not 0 < self.band[0] < self.band[1]:
            raise ValueError(f"band must satisfy 0 < LO < HI (got {self.band})")
        if not 0 < self.epsilon < 1:
            raise ValueError(f"epsilon must lie in (0, 1) (got {self.epsilon})")
        if self.epsilon0 < 0:
            raise ValueError(f"epsilon0 must be nonnegative (got {self.epsilon0})")
        if not 2 < self.p <= 6:
            raise ValueError(f"p must lie in (2, 6] (got {self.p})")
        if self.k is not None and not is_power_of_two(self.k):
            raise ValueError(f"k must be a power of 2 (got {self.k})")
        if self.a is not None and self.a < 1:
            raise ValueError(f"a must be positive (got {self.a})")
        if self.delta is not None and not 0 < self.delta <= 1:
            raise ValueError(f"delta must lie in (0, 1] (got {self.delta})")
        for name in self.ensemble_names:
            try:
                EnsembleKind.from_str(name)
            except ValueError:
                FamilyKind.from_str(name)

    @classmethod
    def from_mapping(cls, values: Mapping[str, str]) -> "ExperimentConfig":
        """
        Build a configuration from textual values.

        :raises ValueError: on unknown keys or malformed values.
        """
        keys = _config_keys()
        kwargs: dict[str, Any] = {}
        for key, value in values.items():
            key = key.strip().lower().replace("-", "_")
            if key not in keys:
                raise ValueError(f"unknown configuration key (got {key!r})")
            try:
                kwargs[key] = keys[key](value)
            except ValueError as e:
                raise ValueError(f"invalid value for {key}: {e}") from e
        if "scenario" not in kwargs:
            raise ValueError("no scenario given")
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path: Path, scenario: str | None = None) -> "ExperimentConfig":
        """
        Read an INI file.

        Keys of the ``[experiment]`` section are overridden by those of the section named after the
        scenario, when present. ``scenario`` overrides the file's scenario.
        """
        parser = configparser.ConfigParser()
        with Path(path).open("r", encoding="utf-8") as f:
            parser.read_file(f)
        if not parser.has_section(EXPERIMENT_SECTION):
            raise ValueError(f"missing [{EXPERIMENT_SECTION}] section in {path}")
        values = dict(parser[EXPERIMENT_SECTION])
        name = scenario or values.get("scenario", "").strip()
        if name and parser.has_section(name):
            values.update(parser[name])
        if name:
            values["scenario"] = name
        return cls.from_mapping(values)

    @property
    def ensemble_names(self) -> list[str]:
        return [name.strip() for name in self.ensemble.split(",") if name.strip()]

    def effective_scales(self) -> tuple[int, ...]:
        return self.scales or SCENARIOS[self.scenario].scales

    def couplings(self) -> dict[str, Any]:
        """Effective value and symbolic coupling of each partition parameter."""
        effective = {"K": self.k, "K1": self.k1, "K2": self.k2, "K3": self.k3, "A": self.a}
        return {name: {"value": effective[name], "coupling": COUPLINGS[name]} for name in COUPLINGS}

    def as_dict(self) -> dict[str, Any]:
        return {f.name: (str(v) if isinstance(v := getattr(self, f.name), Path) else v) for f in fields(self)}


def make_rng(seed: int, scenario: str, R: int, trial: int) -> Generator:
    """Counter-based generator keyed by ``(seed, scenario, R, trial)``."""
    return Generator(Philox(SeedSequence([seed, zlib.crc32(scenario.encode("utf-8")), int(R), int(trial)])))


# ---------------------------------------------------------------------------------------------
# scenarios


@dataclass
class TrialOutcome:
    """Rows, invariant checks and optional artefacts of one trial."""

    rows: list[dict[str, Any]] = field(default_factory=list)
    checks: dict[str, bool] = field(default_factory=dict)
    images: dict[str, SpatialField] = field(default_factory=dict)
    densities: dict[str, FreqDensity] = field(default_factory=dict)
    tubes: list[Tube] = field(default_factory=list)

    def check(self, name: str, value: bool):
        self.checks[name] = self.checks.get(name, True) and bool(value)


TrialFunction = Callable[[ExperimentConfig, int, int, Generator], TrialOutcome]


@dataclass(frozen=True)
class Scenario:
    """A registered experiment; ``scale`` names what the scale list means for it."""

    name: str
    trial: TrialFunction
    scales: tuple[int, ...]
    description: str
    scale: str = "R"


SCENARIOS: dict[str, Scenario] = {}


def _scenario(name: str, scales: tuple[int, ...], description: str, scale: str = "R") -> Callable[[TrialFunction], TrialFunction]:
    def register(fn: TrialFunction) -> TrialFunction:
        SCENARIOS[name] = Scenario(name, fn, scales, description, scale)
        return fn

    return register


def _ensembles(config: ExperimentConfig, default: Sequence[EnsembleKind]) -> list[EnsembleKind]:
    if not config.ensemble_names:
        return list(default)
    return [EnsembleKind.from_str(name) for name in config.ensemble_names]


def _family_kinds(config: ExperimentConfig, default: Sequence[FamilyKind]) -> list[FamilyKind]:
    if not config.ensemble_names:
        return list(default)
    return [FamilyKind.from_str(name) for name in config.ensemble_names]


def _report_row(report: RatioReport, series: str, **extra: Any) -> dict[str, Any]:
    row = report.as_row()
    row["series"] = series
    row.update(extra)
    return row


def _draw(kind: EnsembleKind, R: int, target: Square, rng: Generator, seed: int) -> FreqDensity:
    n = grid_size(R, fine=kind == EnsembleKind.LINE_CONCENTRATED)
    return generate(Ensemble(kind, seed), R, target, rng, n)[0]


def _pair_squares(side: float, offset: float = 0.5) -> tuple[Square, Square]:
    return Square((-offset, -offset), side), Square((offset, offset), side)


@_scenario("bilinear-l2", (16, 32, 64), "bilinear l2 decoupling ratio of two transverse squares")
def _bilinear_trial(config: ExperimentConfig, R: int, trial: int, rng: Generator) -> TrialOutcome:
    side = config.delta if config.delta is not None else R**-0.25
    tau1, tau2 = _pair_squares(side)
    outcome = TrialOutcome()
    kinds = _ensembles(config, (EnsembleKind.RANDOM_PHASE, EnsembleKind.FOCUSING, EnsembleKind.LINE_CONCENTRATED, EnsembleKind.BUSH))
    for kind in kinds:
        f1 = _draw(kind, R, tau1, rng, config.seed)
        f2 = _draw(kind, R, tau2, rng, config.seed)
        report = bilinear_l2_ratio(f1, f2, tau1, tau2, R, config.band, x3_step=config.x3_step)
        outcome.rows.append(_report_row(report, str(kind), ensemble=str(kind)))
        if trial == 0:
            outcome.densities[f"{kind}-f1"] = f1
    return outcome


def _ball_centers(R: int) -> np.ndarray:
    step = 3 * math.sqrt(R)
    return np.array([(0.0, 0.0, 0.0), (step, 0.0, 0.0), (0.0, step, 0.0), (0.0, 0.0, step)])


@_scenario("refined", (16, 32, 64), "refined bilinear decoupling ratio on disjoint R^(1/2)-balls")
def _refined_trial(config: ExperimentConfig, R: int, trial: int, rng: Generator) -> TrialOutcome:
    tau1, tau2 = _pair_squares(config.delta if config.delta is not None else 0.5)
    X = BallUnion(_ball_centers(R), math.sqrt(R))
    outcome = TrialOutcome()
    for kind in _ensembles(config, (EnsembleKind.BUSH, EnsembleKind.SINGLE_CAP)):
        d1 = decompose(_draw(kind, R, tau1, rng, config.seed), R, config.epsilon0)
        d2 = decompose(_draw(kind, R, tau2, rng, config.seed), R, config.epsilon0)
        report = refined_ratio(d1, d2, X, R, config.x3_step)
        outcome.rows.append(_report_row(report, str(kind), ensemble=str(kind)))
    return outcome


@_scenario("linear-dyadic", (16, 32, 64), "linear decoupling over dyadic rectangles against squares")
def _linear_dyadic_trial(config: ExperimentConfig, R: int, trial: int, rng: Generator) -> TrialOutcome:
    outcome = TrialOutcome()
    for kind in _ensembles(config, (EnsembleKind.RANDOM_PHASE, EnsembleKind.LINE_CONCENTRATED)):
        f = _draw(kind, R, FULL_SQUARE, rng, config.seed)
        report = linear_dyadic_ratio(f, R, x3_step=config.x3_step)
        row = _report_row(report, str(kind), ensemble=str(kind))
        if kind == EnsembleKind.LINE_CONCENTRATED:
            caps = math.ceil(2 * math.sqrt(R) - 1e-9)
            if f.n % caps == 0:
                prediction = dirichlet_ratio(caps, f.n // caps)
                row["dirichlet"] = prediction
                squares = report.companion.parameters
                outcome.check("dirichlet", abs(squares["lhs4"] / squares["rhs4"] / prediction - 1) <= 0.2)
        outcome.rows.append(row)
    return outcome


@_scenario("restriction2d", (16, 32, 64), "planar bilinear restriction for transverse segments", scale="1/delta")
def _restriction2d_trial(config: ExperimentConfig, R: int, trial: int, rng: Generator) -> TrialOutcome:
    delta = 1 / R
    n = 4 * R
    a1 = rng.uniform(0, math.pi)
    a2 = a1 + rng.uniform(0.5, math.pi / 2)
    c1 = segment_density(rng.uniform(-0.4, 0.4, 2), (math.cos(a1), math.sin(a1)), 0.5, delta, n, rng)
    c2 = segment_density(rng.uniform(-0.4, 0.4, 2), (math.cos(a2), math.sin(a2)), 0.5, delta, n, rng)
    report = bilinear_restriction_2d(c1, c2)
    return TrialOutcome([_report_row(report, "segments")])


@_scenario("square-function", (16, 32, 64), "reverse square function estimate and narrow/broad labels")
def _square_function_trial(config: ExperimentConfig, R: int, trial: int, rng: Generator) -> TrialOutcome:
    r = config.delta if config.delta is not None else 0.25
    alpha1, alpha2 = _pair_squares(r, 0.25)
    K2 = config.k2 if config.k2 is not None else 2.0
    K1 = config.k1 if config.k1 is not None else 4
    Q = BallUnion([(0.0, 0.0, 0.0)], math.sqrt(R))
    outcome = TrialOutcome()
    f1 = _draw(EnsembleKind.RANDOM_PHASE, R, alpha1, rng, config.seed)
    f2 = _draw(EnsembleKind.RANDOM_PHASE, R, alpha2, rng, config.seed)
    for mode in SquareFunctionMode:
        report = square_function_ratio(f1, f2, alpha1, alpha2, Q, R, mode, K2, config.band)
        row = _report_row(report, str(mode), reverse_ratio=report.reverse_ratio)
        if mode == SquareFunctionMode.CAPS:
            label = classify_narrow_broad(f1, f2, alpha1, alpha2, Q, K1, K2, R, band=config.band)
            row.update(label=str(label.label), narrow_term=label.narrow_term, broad_term=label.broad_term, K1=K1)
        outcome.rows.append(row)
    return outcome


@_scenario("broad-value", (4, 8), "exact and greedy broad norms of random cell values", scale="K")
def _broad_value_trial(config: ExperimentConfig, K: int, trial: int, rng: Generator) -> TrialOutcome:
    A = config.a if config.a is not None else 2
    values = rng.random((K, K))
    exact, collection = broad_value(BroadInstance(K, values, A), BroadMethod.EXACT)
    greedy, _ = broad_value(BroadInstance(K, values, A), BroadMethod.GREEDY)
    outcome = TrialOutcome()
    if K <= EXACT_FIELD_LIMIT:
        outcome.check("exact_equals_enumeration", float(enumerate_broad(values, A)) == exact)
    first = np.abs(rng.normal(size=(K, K)) + 1j * rng.normal(size=(K, K)))
    second = np.abs(rng.normal(size=(K, K)) + 1j * rng.normal(size=(K, K)))
    total = np.abs(first + second)
    A1 = max(1, A // 2)
    bound = float(broad_values(first, A1)) + float(broad_values(second, max(1, A - A1)))
    outcome.check("triangle", float(broad_values(total, A)) <= bound * (1 + 1e-12))
    if A >= 2:
        _, bilinear = separated_pairs(values)
        outcome.check("bilinear", exact <= float(bilinear) * (1 + 1e-12))
    ratio = 0.0 if exact == 0 else greedy / exact
    outcome.rows.append({"lhs": greedy, "rhs": exact, "ratio": ratio, "series": f"A={A}", "A": A, "K": K, "cells": len(collection.cells)})
    return outcome


@_scenario("broad-narrow", (8, 16), "pointwise broad-narrow terms on a 9^3 grid", scale="K")
def _broad_narrow_trial(config: ExperimentConfig, K: int, trial: int, rng: Generator) -> TrialOutcome:
    n = 4 * K
    f = FreqDensity(np.exp(2j * math.pi * rng.random((n, n))))
    axis = np.linspace(-BROAD_BOX, BROAD_BOX, 9)
    points = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), axis=-1).reshape(-1, 3)
    result = broad_narrow_decompose(f, K, config.epsilon, points)
    counts = Counter(result.dominating)
    cases = Counter(gmo_case(f, point, K).case for point in points[::27])
    outcome = TrialOutcome()
    outcome.check("constant", float(result.constant.max()) <= C_CHECK)
    outcome.rows.append(
        {
            "lhs": float(result.value.max()),
            "rhs": float(result.terms.sum(axis=1).max()),
            "ratio": float(result.constant.max()),
            "series": f"K={K}",
            "K": K,
            "A": math.ceil(K**config.epsilon - 1e-12),
            **{f"dominating_{term}": counts[term] for term in BroadNarrowTerm},
            **{f"case_{case}": cases[case] for case in GmoCase},
        }
    )
    return outcome


@_scenario("restriction", (16, 32, 64), "local restriction ratio at the critical exponent")
def _restriction_trial(config: ExperimentConfig, R: int, trial: int, rng: Generator) -> TrialOutcome:
    outcome = TrialOutcome()
    for kind in _ensembles(config, list(EnsembleKind)):
        f = _draw(kind, R, FULL_SQUARE, rng, config.seed)
        report = restriction_ratio(f, R, config.p, str(kind))
        outcome.rows.append(report.as_row() | {"series": str(kind)})
        if config.a is not None and config.k is not None:
            broad = broad_restriction_ratio(f, R, config.a, config.k, config.p, str(kind))
            outcome.rows.append(broad.as_row() | {"series": f"broad/{kind}"})
        if trial == 0 and kind == EnsembleKind.FOCUSING:
            outcome.images[str(kind)] = extend(f, R, ExtensionGrid(half_width=min(R, 16), padding=config.grid_padding))
    return outcome


def _family(kind: FamilyKind, delta: float, rng: Generator) -> LineFamily:
    match kind:
        case FamilyKind.BUSH:
            return bush_family(delta, BUSH_LINES)
        case FamilyKind.BRUSH:
            return brush_family(delta, BRUSH_LINES)
        case FamilyKind.PARALLEL:
            return parallel_family(delta, PARALLEL_SIDE)
        case FamilyKind.RANDOM:
            return random_family(delta, RANDOM_LINES, rng)
    raise ValueError(f"unknown family kind (got {kind})")


def _shadings(config: ExperimentConfig, R: int, rng: Generator) -> list[tuple[str, FamilyKind | None, Shading]]:
    """Labelled shadings of an incidence trial: the configured file, or full and half density shadings of each generator."""
    if config.family is not None:
        return [("file", None, read_family(config.family))]
    shadings = []
    for kind in _family_kinds(config, (FamilyKind.BUSH, FamilyKind.PARALLEL, FamilyKind.RANDOM)):
        family = _family(kind, 1 / R, rng)
        shadings.append((f"{kind}/full", kind, full_shading(family)))
        shadings.append((f"{kind}/half", kind, random_shading(family, 0.5, rng)))
    return shadings


@_scenario("two-ends", (32, 64), "two-ends scan of shaded line families", scale="1/delta")
def _two_ends_trial(config: ExperimentConfig, R: int, trial: int, rng: Generator) -> TrialOutcome:
    outcome = TrialOutcome()
    for label, _, shading in _shadings(config, R, rng):
        result = two_ends_check(shading.family, shading, 0.5, 0.25)
        outcome.check("oracle", two_ends_oracle(shading.family, shading, 0.5) == result.worst[2])
        bound = shading.family.delta**0.25
        outcome.rows.append(
            {
                "lhs": result.worst[2],
                "rhs": bound,
                "ratio": result.worst[2] / bound,
                "series": label,
                "passed": result.passed,
                "density": result.density,
                "lines": len(shading.family),
            }
        )
    return outcome


@_scenario("furstenberg", (32, 128), "measured constant of the two-ends Furstenberg inequality", scale="1/delta")
def _furstenberg_trial(config: ExperimentConfig, R: int, trial: int, rng: Generator) -> TrialOutcome:
    outcome = TrialOutcome()
    for label, _, shading in _shadings(config, R, rng):
        result = furstenberg_ratio(shading.family, shading, config.epsilon, strict=True)
        outcome.check("constant", result.passed)
        outcome.rows.append(
            {
                "lhs": result.union,
                "rhs": result.union / result.constant,
                "ratio": result.constant,
                "series": label,
                "density": result.density,
                "total": result.total,
                "lines": len(shading.family),
            }
        )
    return outcome


@_scenario("prune", (32,), "multiplicity pruning of the union of a shaded family", scale="1/delta")
def _prune_trial(config: ExperimentConfig, R: int, trial: int, rng: Generator) -> TrialOutcome:
    outcome = TrialOutcome()
    for label, kind, shading in _shadings(config, R, rng):
        family = shading.family
        threshold = pruning_mu(family, shading, 0.5)
        kept = -1
        for k in range(max(1, len(family)).bit_length() + 1):
            mu = 2**k
            result = prune_multiplicity(family, shading, mu)
            outcome.check("monotone", result.kept.size >= kept)
            kept = result.kept.size
            if kind == FamilyKind.BUSH and mu < len(family):
                outcome.check("bush_core_removed", result.removed_fraction > 0)
            outcome.rows.append(
                {
                    "lhs": mu,
                    "rhs": result.covered,
                    "ratio": result.removed_fraction,
                    "series": label,
                    "mu_threshold": threshold,
                }
            )
    return outcome


@_scenario("wavepacket", (16, 32), "wave packet reconstruction, direction separation and decay")
def _wavepacket_trial(config: ExperimentConfig, R: int, trial: int, rng: Generator) -> TrialOutcome:
    f = _draw(EnsembleKind.RANDOM_PHASE, R, FULL_SQUARE, rng, config.seed)
    decomp = decompose(f, R, config.epsilon0)
    residual = decomp.residual()
    separation = direction_separation(decomp.tubes)

    # wide grid so that the decay ray of one packet stays inside a period
    n = 2 * math.ceil((24 * R ** (0.5 + config.epsilon0) + 1) / 2)
    kernel = PacketKernel(FreqDensity.ones(n), R, config.epsilon0)
    middle = kernel.cap_count // 2
    cell = kernel.cell_count // 2
    packets, _ = kernel.cap_packets((middle, middle), cells=[(cell, cell)])
    tail = tail_ratio(packets[0]) if packets else 0.0
    leakage = frequency_leakage(packets[0]) if packets else 0.0

    outcome = TrialOutcome()
    outcome.check("residual", residual <= 1e-6)
    outcome.check("separation", separation >= R**-0.5 / 2)
    outcome.check("tail", tail <= R**-3.0)
    outcome.rows.append(
        {
            "ratio": residual,
            "series": "residual",
            "packets": len(decomp.packets),
            "separation": separation,
            "tail": tail,
            "leakage": leakage,
        }
    )
    if trial == 0:
        outcome.tubes = decomp.tubes
        outcome.densities["input"] = f
    return outcome


SUBCOMMANDS: dict[str, dict[str, str]] = {
    "decouple": {
        "bilinear": "bilinear-l2",
        "refined": "refined",
        "linear-dyadic": "linear-dyadic",
        "restriction2d": "restriction2d",
        "squarefn": "square-function",
    },
    "broad": {"value": "broad-value", "decompose": "broad-narrow"},
    "incidence": {"twoends": "two-ends", "furstenberg": "furstenberg", "prune": "prune"},
    "wavepacket": {"verify": "wavepacket"},
}
"""Scenario run by each ``command action`` pair; ``restriction`` runs the scenario of that name."""


# ---------------------------------------------------------------------------------------------
# running


@dataclass
class RunResult:
    """Outcome of :func:`run`."""

    exit_code: ExitCode
    rows: list[dict[str, Any]]
    summary: dict[str, Any]
    paths: list[Path] = field(default_factory=list)


def _collect(config: ExperimentConfig, outcomes: list[tuple[int, int, TrialOutcome]]) -> None:
    """Run every trial, appending ``(scale, trial, outcome)`` in order; stops at the first error."""
    scenario = SCENARIOS[config.scenario]
    jobs = [(R, t) for R in config.effective_scales() for t in range(config.trials)]

    def one(job: tuple[int, int]) -> tuple[int, int, TrialOutcome]:
        R, t = job
        logger.debug(f"{scenario.name}: {scenario.scale}={R} trial {t}")
        return R, t, scenario.trial(config, R, t, make_rng(config.seed, scenario.name, R, t))

    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        for result in pool.map(one, jobs):
            outcomes.append(result)


def _rows(config: ExperimentConfig, outcomes: Sequence[tuple[int, int, TrialOutcome]]) -> list[dict[str, Any]]:
    git = git_describe()
    rows = []
    for R, t, outcome in outcomes:
        for row in outcome.rows:
            full = dict(row)
            full.update(scenario=config.scenario, R=R, seed=config.seed, trial=t, git=git)
            rows.append(full)
    return rows


def _series(rows: Sequence[Mapping[str, Any]], scenario: str) -> dict[str, dict[int, float]]:
    """Largest ratio per scale of each series; companion ratios form a ``/squares`` series."""
    series: dict[str, dict[int, float]] = {}
    for row in rows:
        label = str(row.get("series", scenario))
        for name, key in ((label, "ratio"), (f"{label}/squares", "companion_ratio")):
            value = row.get(key)
            if value is None:
                continue
            by_scale = series.setdefault(name, {})
            by_scale[row["R"]] = max(by_scale.get(row["R"], 0.0), float(value))
    return series


def _fit(by_scale: Mapping[int, float]) -> float | None:
    scales = sorted(by_scale)
    values = [by_scale[R] for R in scales]
    if len(scales) < 2 or any(not v > 0 or not math.isfinite(v) for v in values):
        return None
    return fit_exponent(scales, values)


def _summary(config: ExperimentConfig, rows: Sequence[Mapping[str, Any]], checks: Mapping[str, bool]) -> dict[str, Any]:
    scenario = SCENARIOS[config.scenario]
    series = _series(rows, scenario.name)
    return {
        "scenario": scenario.name,
        "scale": scenario.scale,
        "scales": list(config.effective_scales()),
        "seed": config.seed,
        "trials": config.trials,
        "git": git_describe(),
        "couplings": config.couplings(),
        "config": config.as_dict(),
        "series": {
            label: {"max_ratio": {str(R): v for R, v in sorted(by_scale.items())}, "exponent": _fit(by_scale)}
            for label, by_scale in series.items()
        },
        "checks": dict(checks),
    }


def run(config: ExperimentConfig, write: bool = True) -> RunResult:
    """
    Run a scenario across its scales and write ``<scenario>.csv``, ``<scenario>.json`` and ``<scenario>.svg``.

    Trial artefacts go next to them: PNG slices, input densities (with ``save_inputs``) and tube
    lists. The exit code is :attr:`ExitCode.INVARIANT` when a trial raises a precondition or
    invariant error or an invariant check fails, and :attr:`ExitCode.CONJECTURE` when a conjecture
    instance is violated; the reports are written in every case.

    :param config: Validated configuration.
    :param write: Write files; otherwise only compute the result.
    """
    scenario = SCENARIOS[config.scenario]
    logger.info(f"running {scenario.name} at {scenario.scale} in {list(config.effective_scales())}, {config.trials} trial(s)")
    outcomes: list[tuple[int, int, TrialOutcome]] = []
    exit_code = ExitCode.OK
    error: dict[str, Any] | None = None
    try:
        _collect(config, outcomes)
    except ConjectureViolation as e:
        logger.error(f"{scenario.name}: conjecture instance violated: {e}")
        exit_code = ExitCode.CONJECTURE
        error = {"type": type(e).__name__, "message": str(e), "counterexample": e.bundle}
    except ValueError as e:
        logger.error(f"{scenario.name}: {type(e).__name__}: {e}")
        exit_code = ExitCode.INVARIANT
        error = {"type": type(e).__name__, "message": str(e)}

    checks: dict[str, bool] = {}
    for _, _, outcome in outcomes:
        for name, value in outcome.checks.items():
            checks[name] = checks.get(name, True) and value
    failed = sorted(name for name, value in checks.items() if not value)
    if failed and exit_code == ExitCode.OK:
        logger.error(f"{scenario.name}: failed checks {failed}")
        exit_code = ExitCode.INVARIANT

    rows = _rows(config, outcomes)
    summary = _summary(config, rows, checks)
    summary["passed"] = exit_code == ExitCode.OK
    summary["exit_code"] = int(exit_code)
    if error is not None:
        summary["error"] = error
    result = RunResult(exit_code, rows, summary)
    if write:
        result.paths = _write(config, outcomes, rows, summary)
    return result


def _write(config: ExperimentConfig, outcomes, rows, summary) -> list[Path]:
    out = config.out
    out.mkdir(parents=True, exist_ok=True)
    name = config.scenario
    paths = [out / f"{name}.csv", out / f"{name}.json"]
    write_rows(paths[0], rows)
    write_summary(paths[1], summary)
    if rows:
        series = {
            label: ([float(R) for R in entry["max_ratio"]], list(entry["max_ratio"].values()))
            for label, entry in summary["series"].items()
        }
        paths.append(out / f"{name}.svg")
        plot_growth(paths[-1], series, title=name)
    for R, t, outcome in outcomes:
        stem = f"{name}-R{R}-t{t}"
        for label, F in outcome.images.items():
            paths.append(out / f"{stem}-{label}.png")
            save_slice(paths[-1], F)
        if config.save_inputs:
            for label, f in outcome.densities.items():
                paths.append(out / f"{stem}-{label}.hdc")
                container.save(paths[-1], f)
        if outcome.tubes:
            paths.append(out / f"{stem}-tubes.csv")
            write_tubes(paths[-1], outcome.tubes)
    logger.info(f"wrote {len(paths)} files to {out}")
    return paths


# ---------------------------------------------------------------------------------------------
# acceptance suite


@dataclass(frozen=True)
class CriterionResult:
    number: int
    title: str
    status: CriterionStatus
    detail: str = ""
    seconds: float = 0.0
    scales: tuple[int, ...] | None = None
    trials: int | None = None

    @property
    def parameters(self) -> str:
        if self.scales is None:
            return "fixed"
        return f"R={','.join(map(str, self.scales))} x{self.trials}"


@dataclass
class VerifySummary:
    """Pass/fail table of an acceptance run; ``partial`` when the budget ran out."""

    results: list[CriterionResult]
    partial: bool
    budget: float
    desk: bool = False

    @property
    def exit_code(self) -> ExitCode:
        if self.partial:
            return ExitCode.PARTIAL
        if any(r.status in (CriterionStatus.FAIL, CriterionStatus.ERROR) for r in self.results):
            return ExitCode.INVARIANT
        return ExitCode.OK

    @property
    def vector(self) -> list[str]:
        return [str(r.status) for r in self.results]

    def table(self) -> str:
        lines = [f"{'#':>2} | {'criterion':<28} | {'status':<7} | {'time':>8} | {'parameters':<22} | detail"]
        for r in self.results:
            lines.append(f"{r.number:>2} | {r.title:<28} | {str(r.status):<7} | {r.seconds:>7.1f}s | {r.parameters:<22} | {r.detail}")
        if self.desk:
            lines.append("desk run: reduced scales and trials")
        if self.partial:
            lines.append(f"partial run: budget of {self.budget:g} minutes exhausted")
        return "\n".join(lines)

    def as_dict(self) -> dict[str, Any]:
        return {
            "budget": self.budget,
            "desk": self.desk,
            "partial": self.partial,
            "exit_code": int(self.exit_code),
            "criteria": [
                {
                    "number": r.number,
                    "title": r.title,
                    "status": r.status,
                    "detail": r.detail,
                    "seconds": r.seconds,
                    "scales": None if r.scales is None else list(r.scales),
                    "trials": r.trials,
                }
                for r in self.results
            ],
        }


Verdict = tuple[bool, str]
Check = Callable[[tuple[int, ...] | None, int, int], Verdict]


@dataclass(frozen=True)
class Criterion:
    """
    One acceptance criterion with its full-size and desk-size parameters.

    Criteria without ``scales`` run at fixed sizes; the others take scales (``1/delta`` for the
    planar criterion) and a trial count per scale.
    """

    number: int
    title: str
    check: Check
    scales: tuple[int, ...] | None = None
    trials: int = 1
    desk_scales: tuple[int, ...] | None = None
    desk_trials: int = 1

    def parameters(self, desk: bool = False, scales: Sequence[int] | None = None) -> tuple[tuple[int, ...] | None, int | None]:
        """Scales and trials of a run; an explicit ``scales`` wins over both presets."""
        if self.scales is None:
            return None, None
        if scales is None:
            scales = self.desk_scales if desk else self.scales
        return tuple(scales), self.desk_trials if desk else self.trials


def _outcome(config: ExperimentConfig) -> RunResult:
    result = run(config, write=False)
    if "error" in result.summary:
        err = result.summary["error"]
        if err["type"] == ConjectureViolation.__name__:
            raise ConjectureViolation(err["message"], err.get("counterexample"))
        raise InvariantViolation(f"{err['type']}: {err['message']}")
    return result


def _exponents_below(summary: Mapping[str, Any], limit: float, labels: Sequence[str] | None = None) -> Verdict:
    details = []
    ok = True
    for label, entry in sorted(summary["series"].items()):
        if labels is not None and label not in labels:
            continue
        e = entry["exponent"]
        details.append(f"{label}={'n/a' if e is None else f'{e:.3f}'}")
        ok &= e is not None and e <= limit
    return ok, f"exponents <= {limit}: " + ", ".join(details)


def _criterion_algebra(scales, trials, seed: int) -> Verdict:
    rng = make_rng(seed, "verify-algebra", 1, 0)
    xi, eta = rng.uniform(-1, 1, (2, 1000))
    points = np.column_stack([xi, eta, xi * eta])
    maps = [nonisotropic_dilate(DilationAxis.HORIZONTAL, 4.0), nonisotropic_dilate(DilationAxis.VERTICAL, 4.0)]
    for _ in range(8):
        c1, c2 = rng.uniform(-0.75, 0.75, 2)
        maps.append(hyperbolic_rescale(c1, c2, rng.uniform(0.25, 1.0)))
    residual = identity = 0.0
    for m in maps:
        image = m(points)
        scale = max(1.0, float(np.abs(image).max()))
        residual = max(residual, float(np.abs(image[:, 2] - image[:, 0] * image[:, 1]).max()) / scale)
        identity = max(identity, float(np.abs(m.inverse()(image) - points).max()))
    return residual <= 1e-12 and identity <= 1e-12, f"residual {residual:.2e}, identity {identity:.2e}"


def _criterion_extension(scales, trials, seed: int) -> Verdict:
    rng = make_rng(seed, "verify-extension", 33, 0)
    f = FreqDensity(rng.normal(size=(33, 33)) + 1j * rng.normal(size=(33, 33)))
    F = extend(f, 8, ExtensionGrid(half_width=4))
    points = np.stack(F.coordinates(), axis=-1).reshape(-1, 3)
    direct = extend_direct(f, points).reshape(F.samples.shape)
    error = float(np.linalg.norm(F.samples - direct) / np.linalg.norm(direct))
    return error <= 1e-6, f"relative L2 error {error:.2e} on {'x'.join(map(str, F.samples.shape))} points"


def _criterion_wavepackets(scales, trials, seed: int) -> Verdict:
    result = _outcome(ExperimentConfig("wavepacket", scales=scales, seed=seed, trials=trials))
    return all(result.summary["checks"].values()), f"checks {result.summary['checks']}"


def _criterion_restriction2d(scales, trials, seed: int) -> Verdict:
    result = _outcome(ExperimentConfig("restriction2d", scales=scales, seed=seed, trials=trials))
    peak = max(row["ratio"] for row in result.rows)
    ok, detail = _exponents_below(result.summary, 0.1)
    return ok and peak <= 10, f"max ratio {peak:.3f}; {detail}"


def _criterion_base_case(scales, trials, seed: int) -> Verdict:
    config = ExperimentConfig("bilinear-l2", scales=scales, seed=seed, trials=trials, ensemble="random-phase")
    return _exponents_below(_outcome(config).summary, 0.1)


def _criterion_bilinear(scales, trials, seed: int) -> Verdict:
    config = ExperimentConfig("bilinear-l2", scales=scales, seed=seed, trials=trials, delta=1.0)
    return _exponents_below(_outcome(config).summary, 0.15)


def _criterion_linear_dyadic(scales, trials, seed: int) -> Verdict:
    summary = _outcome(ExperimentConfig("linear-dyadic", scales=scales, seed=seed, trials=trials)).summary
    ok, detail = _exponents_below(summary, 0.15, ["random-phase", "line-concentrated"])
    squares = summary["series"].get("line-concentrated/squares", {}).get("exponent")
    dirichlet = summary["checks"].get("dirichlet", False)
    ok = ok and squares is not None and squares >= 0.1 and dirichlet
    return ok, f"{detail}; squares-only exponent {squares}; dirichlet match {dirichlet}"


def _criterion_refined(scales, trials, seed: int) -> Verdict:
    config = ExperimentConfig("refined", scales=scales, seed=seed, trials=trials)
    return _exponents_below(_outcome(config).summary, 0.15)


def _criterion_broad(scales, trials, seed: int) -> Verdict:
    checks: dict[str, bool] = {}
    for K, count in ((4, 100), (8, 20)):
        summary = _outcome(ExperimentConfig("broad-value", scales=(K,), seed=seed, trials=count)).summary
        checks.update({f"{name}@K={K}": value for name, value in summary["checks"].items()})
    result = _outcome(ExperimentConfig("broad-narrow", scales=(8, 16), seed=seed))
    worst = max(row["ratio"] for row in result.rows)
    checks["broad-narrow"] = worst <= C_CHECK
    return all(checks.values()), f"checks {checks}; largest broad-narrow constant {worst:.3f}"


def _criterion_pigeonhole(scales, trials, seed: int) -> Verdict:
    rng = make_rng(seed, "verify-pigeonhole", 1, 0)
    for _ in range(1000):
        qs = range(int(rng.integers(1, 20)))
        lams = range(int(rng.integers(1, 6)))
        I = {Q: 1 + float(rng.random()) for Q in qs}
        table = {(Q, lam): float(rng.uniform(0.5, 8.0)) for Q in qs for lam in lams}
        C = max(I[Q] / math.fsum(table[(Q, lam)] for lam in lams) for Q in qs)
        pigeonhole_select(I, table, C)
    return True, "1000 tables"


def _criterion_incidence(scales, trials, seed: int) -> Verdict:
    checks: dict[str, bool] = {}
    for name in ("two-ends", "prune"):
        summary = _outcome(ExperimentConfig(name, scales=(32,), seed=seed)).summary
        checks.update({f"{name}:{key}": value for key, value in summary["checks"].items()})
    result = _outcome(ExperimentConfig("furstenberg", scales=(32, 128), seed=seed))
    checks["furstenberg"] = result.summary["checks"].get("constant", False)
    lowest = min(row["ratio"] for row in result.rows)
    return all(checks.values()), f"checks {checks}; smallest constant {lowest:.4f}"


def _criterion_restriction(scales, trials, seed: int) -> Verdict:
    config = ExperimentConfig("restriction", scales=scales, seed=seed, trials=trials, a=2, k=8)
    summary = _outcome(config).summary
    plain = [label for label in summary["series"] if not label.startswith("broad/")]
    broad = [label for label in summary["series"] if label.startswith("broad/")]
    ok1, detail1 = _exponents_below(summary, 0.2, plain)
    ok2, detail2 = _exponents_below(summary, 0.25, broad)
    return ok1 and ok2, f"{detail1}; {detail2}"


CRITERIA: list[Criterion] = [
    Criterion(1, "exact algebra", _criterion_algebra),
    Criterion(2, "extension oracle", _criterion_extension),
    Criterion(3, "wave packets", _criterion_wavepackets, (64, 256), 1, (16, 32), 1),
    Criterion(4, "bilinear restriction 2D", _criterion_restriction2d, (16, 64, 256), 50, (16, 32, 64), 10),
    Criterion(5, "base case", _criterion_base_case, (256, 1024, 4096), 50, (16, 64, 256), 5),
    Criterion(6, "bilinear l2 decoupling", _criterion_bilinear, (64, 256, 1024), 50, (16, 32, 64), 2),
    Criterion(7, "dyadic linear decoupling", _criterion_linear_dyadic, (64, 256, 1024), 10, (16, 32, 64), 1),
    Criterion(8, "refined bilinear decoupling", _criterion_refined, (64, 256, 1024), 10, (16, 32, 64), 2),
    Criterion(9, "broad norm", _criterion_broad),
    Criterion(10, "pigeonholing", _criterion_pigeonhole),
    Criterion(11, "incidence", _criterion_incidence),
    Criterion(12, "restriction at p = 22/7", _criterion_restriction, (64, 256, 1024), 10, (16, 32, 64), 2),
]
"""Acceptance criteria in order, at full size unless a desk run is requested."""


def verify_all(
    budget: float = DEFAULT_BUDGET,
    scales: Sequence[int] | None = None,
    seed: int = 0,
    desk: bool = False,
    overrides: Mapping[int, Sequence[int]] | None = None,
) -> VerifySummary:
    """
    Run the acceptance criteria in order within a time budget.

    A criterion is only started while the budget lasts; the remaining ones are skipped and the
    run is flagged partial, including when the budget is 0. Every result records the scales and
    trials it was planned with.

    :param budget: Minutes.
    :param scales: Scales for every scale-dependent criterion, replacing their presets.
    :param seed: Seed of every generator.
    :param desk: Use the reduced desk-size scales and trials.
    :param overrides: Scales per criterion number; these win over ``scales``.
    :raises ValueError: if an override names a criterion without scales.
    """
    overrides = dict(overrides or {})
    for number in overrides:
        if not any(c.number == number and c.scales is not None for c in CRITERIA):
            raise ValueError(f"criterion {number} takes no scales")
    deadline = time.monotonic() + budget * 60
    results = []
    partial = False
    for criterion in CRITERIA:
        chosen, trials = criterion.parameters(desk, overrides.get(criterion.number, scales))
        planned = {"scales": chosen, "trials": trials}
        if time.monotonic() >= deadline:
            partial = True
            results.append(CriterionResult(criterion.number, criterion.title, CriterionStatus.SKIPPED, "budget exhausted", **planned))
            continue
        start = time.monotonic()
        try:
            ok, detail = criterion.check(chosen, trials or 1, seed)
            status = CriterionStatus.PASS if ok else CriterionStatus.FAIL
        except ConjectureViolation as e:
            status, detail = CriterionStatus.FAIL, f"conjecture violation: {e}"
        except Exception as e:
            status, detail = CriterionStatus.ERROR, f"{type(e).__name__}: {e}"
        seconds = time.monotonic() - start
        logger.info(f"criterion {criterion.number} ({criterion.title}) at {planned}: {status} in {seconds:.1f}s")
        results.append(CriterionResult(criterion.number, criterion.title, status, detail, seconds, **planned))
    if partial:
        logger.warning(f"budget of {budget} minutes exhausted; partial run")
    return VerifySummary(results, partial, budget, desk)


# ---------------------------------------------------------------------------------------------
# command line


def build_parser() -> argparse.ArgumentParser:
    base = argparse.ArgumentParser(add_help=False)
    base.add_argument("--log-level", action="store", default=argparse.SUPPRESS, help="change logging level. invalid values are silently ignored")

    common = argparse.ArgumentParser(add_help=False, parents=[base])
    common.add_argument("--config", type=Path, help="INI file with an [experiment] section")
    common.add_argument("--seed", type=int, help="64-bit seed")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--scales", type=parse_scales, help='comma separated scales, such as "64,256" or "2^6,2^8"')
    common.add_argument("--band", type=parse_band, help='transversality band "LO:HI"')
    common.add_argument("--p", type=float, help="restriction exponent")
    common.add_argument("--ensemble", help="comma separated ensemble kinds or line family generators")
    common.add_argument("--broad", type=parse_pair, metavar="A,K", help="also measure the broad restriction ratio")
    common.add_argument("--trials", type=int, help="trials per scale")
    common.add_argument("--family", type=Path, help="line family file for the incidence scenarios")
    common.add_argument("--save-inputs", action="store_true", help="write the input densities as containers")

    parser = argparse.ArgumentParser(
        prog="hypdec_lab",
        description="Numerical experiments on decoupling, restriction and incidence for the hyperbolic paraboloid.",
        parents=[base],
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for command, actions in SUBCOMMANDS.items():
        p = sub.add_parser(command, parents=[common], help=f"{command} scenarios")
        p.add_argument("action", choices=list(actions))
    sub.add_parser("restriction", parents=[common], help="restriction ratio scenario")
    sub.add_parser("run", parents=[common], help="run the scenario named in --config")
    verify = sub.add_parser("verify-all", parents=[base], help="run the acceptance suite")
    verify.add_argument("--budget", type=float, default=DEFAULT_BUDGET, help="time budget in minutes")
    verify.add_argument("--scales", type=parse_scales, help="scales for every scale-dependent criterion")
    verify.add_argument(
        "--criterion-scales",
        type=parse_criterion_scales,
        action="append",
        default=[],
        metavar="N=SCALES",
        help='scales for one criterion, such as "5=2^8,2^10"; may be repeated',
    )
    verify.add_argument("--desk", action="store_true", help="reduced scales and trials for a quick run")
    verify.add_argument("--seed", type=int, default=0, help="64-bit seed")
    verify.add_argument("--out", type=Path, help="write the table as JSON to this file")
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    """
    Assemble a configuration from the config file and command-line overrides.

    :raises ValueError: if no scenario is determined or a value is invalid.
    """
    scenario = None
    if args.command in SUBCOMMANDS:
        scenario = SUBCOMMANDS[args.command][args.action]
    elif args.command == "restriction":
        scenario = "restriction"
    if args.config is not None:
        config = ExperimentConfig.from_file(args.config, scenario)
    elif scenario is not None:
        config = ExperimentConfig(scenario)
    else:
        raise ValueError("the run command needs --config")

    overrides: dict[str, Any] = {}
    for key in ("seed", "out", "band", "p", "ensemble", "trials", "family"):
        if getattr(args, key) is not None:
            overrides[key] = getattr(args, key)
    if args.scales is not None:
        overrides["scales"] = tuple(args.scales)
    if args.broad is not None:
        overrides["a"], overrides["k"] = args.broad
    if args.save_inputs:
        overrides["save_inputs"] = True
    return replace(config, **overrides)


def configure_logging(value: str | None):
    log_level = logging.WARNING
    if value is not None:
        try:
            log_level_int = int(value)
            if log_level_int in logging._levelToName:
                log_level = log_level_int
        except ValueError:
            log_level = logging._nameToLevel.get(value.upper(), log_level)
    logging.basicConfig(format="[%(levelname)s %(asctime)s] %(filename)s: %(message)s", level=log_level)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(getattr(args, "log_level", None))

    try:
        if args.command == "verify-all":
            summary = verify_all(args.budget, args.scales, args.seed, args.desk, dict(args.criterion_scales))
            print(summary.table())
            if args.out is not None:
                write_summary(args.out, summary.as_dict())
            return int(summary.exit_code)

        config = config_from_args(args)
        result = run(config)
    except (OSError, ValueError) as err:
        print(f"{parser.prog}: {type(err).__name__}: {err}", file=sys.stderr)
        return int(ExitCode.INVARIANT)

    for label, entry in sorted(result.summary["series"].items()):
        exponent = entry["exponent"]
        print(f"{label:<32} | max ratio {max(entry['max_ratio'].values()):>12.6g} | exponent {'-' if exponent is None else f'{exponent:.4f}'}")
    if "error" in result.summary:
        print(f"{parser.prog}: {result.summary['error']['type']}: {result.summary['error']['message']}", file=sys.stderr)
    return int(result.exit_code)
