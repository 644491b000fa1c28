"""
CSV rows, JSON summaries and SVG log-log plots of experiment runs.
"""
import csv
import functools
import json
import logging
import math
import subprocess
from collections.abc import Iterable, Mapping, Sequence
from enum import Enum
from pathlib import Path
from typing import Any

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from ..wavepacket import Tube  # noqa: E402

__all__ = [
    "FIXED_COLUMNS",
    "TUBE_COLUMNS",
    "git_describe",
    "format_value",
    "write_rows",
    "write_summary",
    "plot_growth",
    "write_tubes",
]

logger = logging.getLogger(__name__)

FIXED_COLUMNS = ("scenario", "R", "seed", "trial", "git", "lhs", "rhs", "ratio")
"""Leading CSV columns, in order. Parameter columns follow in sorted order."""
TUBE_COLUMNS = ("theta_i", "theta_j", "v_i", "v_j", "c_theta_xi", "c_theta_eta", "c_v_x1", "c_v_x2", "dir_x3", "dir_x1", "dir_x2", "radius", "length")
SVG_HASH_SALT = "hypdec"


@functools.cache
def git_describe() -> str:
    """
    The ``git describe`` string of the working tree, or ``"unknown"`` outside a repository.
    """
    try:
        result = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            capture_output=True,
            text=True,
            check=True,
            cwd=Path(__file__).resolve().parent,
        )
    except (OSError, subprocess.CalledProcessError):
        return "unknown"
    return result.stdout.strip() or "unknown"


def format_value(value: Any) -> str:
    """
    Render one cell. Floats use the shortest round-tripping form, so equal runs give equal bytes.
    """
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(float(value))
    if isinstance(value, (list, tuple)):
        return " ".join(format_value(v) for v in value)
    return str(value)


def _columns(rows: Sequence[Mapping[str, Any]]) -> list[str]:
    extra = sorted({key for row in rows for key in row} - set(FIXED_COLUMNS))
    return list(FIXED_COLUMNS) + extra


def write_rows(path: Path, rows: Sequence[Mapping[str, Any]]):
    """
    Write per-trial rows to a CSV file.

    :param path: Destination file.
    :param rows: Mappings keyed by column name. Missing cells are left empty.
    """
    columns = _columns(rows)
    with Path(path).open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_value(row.get(column)) for column in columns])
    logger.debug(f"wrote {len(rows)} rows to {path}")


def _jsonable(value: Any) -> Any:
    if isinstance(value, Enum):
        return str(value)
    if isinstance(value, Mapping):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, float) and not math.isfinite(value):
        return format_value(value)
    if hasattr(value, "tolist"):
        return _jsonable(value.tolist())
    return value


def write_summary(path: Path, summary: Mapping[str, Any]):
    """Write a JSON summary with sorted keys."""
    with Path(path).open("w", encoding="utf-8") as f:
        json.dump(_jsonable(summary), f, indent=2, sort_keys=True)
        f.write("\n")


def plot_growth(path: Path, series: Mapping[str, tuple[Sequence[float], Sequence[float]]], title: str = "", ylabel: str = "ratio"):
    """
    Log-log plot of ratios against the scale, one line per series.

    Series with no positive value are skipped. The SVG carries no date and a fixed hash salt.

    :param path: Destination ``.svg`` file.
    :param series: Map of label to ``(scales, values)``.
    """
    plt.rcParams["svg.hashsalt"] = SVG_HASH_SALT
    fig, ax = plt.subplots(figsize=(6, 4))
    try:
        plotted = 0
        for label in sorted(series):
            scales, values = series[label]
            points = [(R, v) for R, v in zip(scales, values) if R > 0 and v > 0]
            if not points:
                logger.warning(f"series {label!r} has no positive values, not plotted")
                continue
            ax.loglog(*zip(*points), marker="o", base=2, label=label)
            plotted += 1
        ax.set_xlabel("R")
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        if plotted:
            ax.legend()
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
    finally:
        plt.close(fig)


def _tube_row(tube: Tube) -> list[Any]:
    return [
        *tube.theta_index,
        *tube.v_index,
        *tube.c_theta,
        *tube.c_v,
        *(float(c) for c in tube.direction),
        tube.radius,
        tube.length,
    ]


def write_tubes(path: Path, tubes: Iterable[Tube]):
    """Write the tubes of a wave packet decomposition, one per row."""
    with Path(path).open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(TUBE_COLUMNS)
        for tube in tubes:
            writer.writerow([format_value(v) for v in _tube_row(tube)])
