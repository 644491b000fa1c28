"""
Self-describing binary container for densities and sampled fields.
"""
from pathlib import Path

import construct as cs
import numpy as np

from ..classes.enums import Surface, VerticalProfile
from ..field import FreqDensity, SpatialField

__all__ = [
    "MAGIC",
    "ContainerStruct",
    "dump_density",
    "dump_field",
    "load",
    "read",
    "save",
]

MAGIC = b"HDC1"
"""Leading bytes of every container."""
PAYLOAD_DTYPE = np.dtype("<c8")
"""Payload element type: little-endian complex64."""
ContainerStruct = cs.Struct(
    cs.Const(MAGIC),
    "kind" / cs.Enum(cs.Int8ul, density=0, field=1),
    "surface" / cs.Int8ul,
    "profile" / cs.Int8ul,
    "has_thickness" / cs.Flag,
    "thickness" / cs.Float64l,
    "spacing" / cs.Float64l,
    "R" / cs.Float64l,
    "center" / cs.Float64l[3],
    "offset" / cs.Int32sl[2],
    "ndim" / cs.Rebuild(cs.Int8ul, cs.len_(cs.this.shape)),
    "shape" / cs.Int32ul[cs.this.ndim],
    "payload_size" / cs.Rebuild(cs.Int64ul, cs.len_(cs.this.payload)),
    "payload" / cs.Bytes(cs.this.payload_size),
)


def _payload(samples: np.ndarray) -> bytes:
    return np.ascontiguousarray(samples, dtype=PAYLOAD_DTYPE).tobytes()


def dump_density(f: FreqDensity) -> bytes:
    """
    Serialize a density.

    :param f: A :class:`~hypdec.field.FreqDensity`.
    :returns: The container bytes.
    """
    return ContainerStruct.build(
        dict(
            kind="density",
            surface=f.surface.value,
            profile=f.profile.value,
            has_thickness=f.thickness is not None,
            thickness=f.thickness or 0.0,
            spacing=f.spacing,
            R=0.0,
            center=[0.0, 0.0, 0.0],
            offset=list(f.offset),
            shape=list(f.samples.shape),
            payload=_payload(f.samples),
        )
    )


def dump_field(F: SpatialField) -> bytes:
    """
    Serialize a sampled field.

    :param F: A :class:`~hypdec.field.SpatialField`.
    :returns: The container bytes.
    """
    return ContainerStruct.build(
        dict(
            kind="field",
            surface=0,
            profile=0,
            has_thickness=False,
            thickness=0.0,
            spacing=F.spacing,
            R=F.R,
            center=list(F.center),
            offset=[0, 0],
            shape=list(F.samples.shape),
            payload=_payload(F.samples),
        )
    )


def load(data: bytes) -> FreqDensity | SpatialField:
    """
    Parse container bytes.

    :param data: Bytes produced by :func:`dump_density` or :func:`dump_field`.
    :returns: The stored object; samples are widened back to complex128.
    :raises ValueError: if the bytes are not a valid container.
    """
    try:
        parsed = ContainerStruct.parse(data)
    except cs.ConstructError as e:
        raise ValueError(f"invalid container: {e}") from e
    samples = np.frombuffer(parsed.payload, dtype=PAYLOAD_DTYPE).reshape(tuple(parsed.shape)).astype(np.complex128)
    if parsed.kind == "density":
        return FreqDensity(
            samples,
            Surface(parsed.surface),
            parsed.thickness if parsed.has_thickness else None,
            VerticalProfile(parsed.profile),
            tuple(parsed.offset),
            parsed.spacing,
        )
    return SpatialField(samples, parsed.spacing, tuple(parsed.center), parsed.R)


def save(path: Path, obj: FreqDensity | SpatialField):
    """Write a density or field to ``path``."""
    data = dump_density(obj) if isinstance(obj, FreqDensity) else dump_field(obj)
    Path(path).write_bytes(data)


def read(path: Path) -> FreqDensity | SpatialField:
    """Read a container file."""
    return load(Path(path).read_bytes())
