"""Binary mask cleanup and sample-interior construction.

Small speckle components are removed by connected-component size, masks
are eroded with a disk element (image border counts as background), and
enclosed holes are filled by flooding from the border. The interior mask
combines Otsu binarization, hole filling and erosion to exclude the
sample rim from porosity counts.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .core import BinaryMask2D, Image2D
from .thresholding import otsu_binarize

_STRUCTURE_4 = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
_STRUCTURE_8 = np.ones((3, 3), dtype=bool)


def _structure(connectivity: int) -> np.ndarray:
    if connectivity == 4:
        return _STRUCTURE_4
    if connectivity == 8:
        return _STRUCTURE_8
    raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")


def disk_element(radius: int) -> np.ndarray:
    """Boolean disk: offsets with dx^2 + dy^2 <= radius^2."""
    if radius < 1:
        raise ValueError(f"radius must be >= 1, got {radius}")
    r = int(radius)
    y, x = np.ogrid[-r : r + 1, -r : r + 1]
    return x * x + y * y <= r * r


def remove_small_objects(mask: BinaryMask2D, min_size: int, connectivity: int = 8) -> BinaryMask2D:
    """Clear connected components with fewer than ``min_size`` pixels."""
    if min_size < 1:
        raise ValueError(f"min_size must be >= 1, got {min_size}")
    labels, n = ndimage.label(mask.data, structure=_structure(connectivity))
    if n == 0 or min_size == 1:
        return BinaryMask2D(mask.data.copy())
    sizes = np.bincount(labels.ravel(), minlength=n + 1)
    keep = sizes >= min_size
    keep[0] = False
    return BinaryMask2D(keep[labels])


def binary_erosion(mask: BinaryMask2D, radius: int) -> BinaryMask2D:
    """Erode with a disk of the given radius; the border is background."""
    eroded = ndimage.binary_erosion(mask.data, structure=disk_element(radius), border_value=0)
    return BinaryMask2D(eroded)


def fill_holes(mask: BinaryMask2D) -> BinaryMask2D:
    """Set background regions not connected to the image border to True."""
    return BinaryMask2D(ndimage.binary_fill_holes(mask.data))


def sample_interior_mask(img: Image2D, erosion_radius: int) -> BinaryMask2D:
    """Interior of the (bright) sample: Otsu, fill holes, erode.

    The result marks voxels safely inside the sample so that porosity
    counts and rim filling can exclude the exterior and the rim.
    """
    sample = otsu_binarize(img, bright_foreground=True)
    filled = fill_holes(sample)
    if erosion_radius >= 1:
        filled = binary_erosion(filled, erosion_radius)
    return filled
