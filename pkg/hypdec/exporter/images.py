"""
PNG snapshots of sampled fields.
"""
import logging
from pathlib import Path

import numpy as np
from PIL import Image

from ..field import SpatialField

__all__ = [
    "slice_image",
    "save_slice",
]

logger = logging.getLogger(__name__)


def slice_image(F: SpatialField, axis: int = 2, index: int | None = None, size: int | None = None) -> Image.Image:
    """
    Grayscale image of ``|Ef|`` on one coordinate plane of the sampling grid.

    Brightness is linear in ``|Ef|`` and normalized to the slice maximum; a vanishing slice is black.

    :param F: Sampled field.
    :param axis: Coordinate held fixed (0, 1 or 2).
    :param index: Plane index along ``axis``; defaults to the middle plane.
    :param size: Optional side length in pixels; the image is resampled bicubically.
    :raises ValueError: if ``axis`` or ``index`` is out of range.
    """
    if axis not in (0, 1, 2):
        raise ValueError(f"axis must be 0, 1 or 2 (got {axis})")
    count = F.samples.shape[axis]
    if index is None:
        index = count // 2
    if not 0 <= index < count:
        raise ValueError(f"index must be in [0, {count}) (got {index})")

    plane = np.abs(np.take(F.samples, index, axis=axis))
    peak = float(plane.max())
    if peak > 0:
        plane = plane / peak
    # rows run along the second remaining axis so that the first one is horizontal
    pixels = np.round(255 * plane.T[::-1]).astype(np.uint8)
    image = Image.fromarray(pixels, mode="L")
    if size is not None:
        image = image.resize((size, size), Image.BICUBIC)
    return image


def save_slice(path: Path, F: SpatialField, axis: int = 2, index: int | None = None, size: int | None = None):
    """Write :func:`slice_image` to a PNG file."""
    slice_image(F, axis, index, size).save(Path(path), format="png")
    logger.debug(f"wrote slice {axis}:{index} of a {F.samples.shape} field to {path}")
