"""
Text format for line families and their shadings.

A file starts with a ``# delta=<float>`` header. Every other nonblank line that does not start
with ``#`` describes one line of the family::

    px py pz ; ux uy uz ; c1x c1y c1z , c2x c2y c2z , ...

where ``p`` is a point on the line, ``u`` its direction and ``c1, c2, ...`` the ball centers of
its shading. The center list may be empty.
"""
import logging
from pathlib import Path
from typing import TextIO

import numpy as np

from ..incidence import LineFamily, Shading

__all__ = [
    "parse_family",
    "write_family",
    "read_family",
    "save_family",
]

logger = logging.getLogger(__name__)

DELTA_KEY = "delta"


def _vector(text: str, line_no: int) -> list[float]:
    parts = text.split()
    if len(parts) != 3:
        raise ValueError(f"expected 3 coordinates at line {line_no} (got {len(parts)})")
    try:
        return [float(v) for v in parts]
    except ValueError as e:
        raise ValueError(f"invalid coordinate at line {line_no}: {text.strip()!r}") from e


def parse_family(file: TextIO) -> Shading:
    """
    Parse a family with its shading.

    :param file: Text stream in the format described above.
    :returns: The shading; its ``family`` attribute holds the lines.
    :raises ValueError: on a missing header, malformed lines, or when the data violate the
        invariants of :class:`~hypdec.incidence.LineFamily` or :class:`~hypdec.incidence.Shading`.
    """
    delta: float | None = None
    points: list[list[float]] = []
    directions: list[list[float]] = []
    centers: list[np.ndarray] = []
    for line_no, line in enumerate(file, start=1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, sep, value = line[1:].partition("=")
            if sep and key.strip() == DELTA_KEY:
                if delta is not None:
                    raise ValueError(f"duplicate delta header at line {line_no}")
                try:
                    delta = float(value)
                except ValueError as e:
                    raise ValueError(f"invalid delta at line {line_no}: {value.strip()!r}") from e
            continue

        fields = line.split(";")
        if len(fields) != 3:
            raise ValueError(f"expected 3 ';'-separated fields at line {line_no} (got {len(fields)})")
        points.append(_vector(fields[0], line_no))
        directions.append(_vector(fields[1], line_no))
        chunks = [chunk for chunk in fields[2].split(",") if chunk.strip()]
        centers.append(np.array([_vector(chunk, line_no) for chunk in chunks]).reshape(-1, 3))

    if delta is None:
        raise ValueError("missing '# delta=' header")
    family = LineFamily(np.array(points).reshape(-1, 3), np.array(directions).reshape(-1, 3), delta)
    logger.debug(f"parsed a family of {len(family)} lines at delta={delta}")
    return Shading.from_centers(family, centers)


def _fmt(vector: np.ndarray) -> str:
    return " ".join(repr(float(v)) for v in vector)


def write_family(file: TextIO, shading: Shading):
    """Write a shading and its family in the format read by :func:`parse_family`."""
    family = shading.family
    file.write(f"# {DELTA_KEY}={float(family.delta)!r}\n")
    for k in range(len(family)):
        balls = " , ".join(_fmt(c) for c in shading.centers(k))
        file.write(f"{_fmt(family.points[k])} ; {_fmt(family.directions[k])} ; {balls}\n")


def read_family(path: Path) -> Shading:
    with Path(path).open("r", encoding="utf-8") as f:
        return parse_family(f)


def save_family(path: Path, shading: Shading):
    with Path(path).open("w", encoding="utf-8") as f:
        write_family(f, shading)
