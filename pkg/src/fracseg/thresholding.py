"""Local adaptive thresholding, global Otsu thresholding, and rim filling.

The local threshold compares each pixel against a Gaussian-smoothed copy
of its neighborhood minus an offset, so it is invariant to additive
intensity shifts and insensitive to slowly varying brightness such as
beam hardening. Otsu picks the 256-bin split maximizing between-class
variance. Rim filling replaces everything outside a sample-interior mask
with a flat intensity so the sample/air contrast cannot dominate local
statistics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import BinaryMask2D, Histogram, Image2D, N_BINS
from .ridge import gaussian_filter

DARK_FOREGROUND = "dark"
BRIGHT_FOREGROUND = "bright"


@dataclass(frozen=True)
class LocalThresholdParams:
    """Gaussian window sigma, offset, and foreground polarity."""

    window_sigma: float = 15.0
    offset: float = 0.05
    polarity: str = DARK_FOREGROUND

    def __post_init__(self):
        if self.window_sigma <= 0:
            raise ValueError(f"window_sigma must be positive, got {self.window_sigma}")
        if self.polarity not in (DARK_FOREGROUND, BRIGHT_FOREGROUND):
            raise ValueError(f"polarity must be '{DARK_FOREGROUND}' or '{BRIGHT_FOREGROUND}'")


def local_threshold(img: Image2D, params: LocalThresholdParams) -> BinaryMask2D:
    """Binarize against a per-pixel threshold map.

    The map is the Gaussian-smoothed image minus ``params.offset``;
    dark-foreground marks pixels below it, bright-foreground above it.
    """
    threshold_map = gaussian_filter(img, params.window_sigma).data - params.offset
    if params.polarity == DARK_FOREGROUND:
        mask = img.data < threshold_map
    else:
        mask = img.data > threshold_map
    return BinaryMask2D(mask)


def otsu_threshold(hist: Histogram) -> int:
    """Histogram split maximizing between-class variance.

    Returns the smallest bin index k such that class 0 = bins <= k; the
    result agrees with an exhaustive search over all 255 splits. A
    histogram with fewer than two occupied bins has no valid split.
    """
    counts = hist.bins.astype(np.float64)
    if hist.total <= 0 or int(np.count_nonzero(hist.bins)) < 2:
        raise ValueError("degenerate histogram")
    idx = np.arange(N_BINS, dtype=np.float64)
    w0 = np.cumsum(counts)
    s0 = np.cumsum(counts * idx)
    total = w0[-1]
    s_total = s0[-1]
    w0 = w0[:-1]
    s0 = s0[:-1]
    w1 = total - w0
    s1 = s_total - s0
    valid = (w0 > 0) & (w1 > 0)
    # (s0*w1 - s1*w0)^2 / (w0*w1) == w0*w1*(mu0 - mu1)^2; counts are
    # integers so every quantity before the square is exact in float64.
    numer = s0 * w1 - s1 * w0
    variance = np.where(valid, numer * numer / np.where(valid, w0 * w1, 1.0), -1.0)
    return int(np.argmax(variance))


def otsu_binarize(img: Image2D, bright_foreground: bool = True) -> BinaryMask2D:
    """Global Otsu binarization of an image in [0, 1]."""
    from .core import bin_index, compute_histogram

    k = otsu_threshold(compute_histogram(img))
    bins = bin_index(img.data)
    mask = bins > k if bright_foreground else bins <= k
    return BinaryMask2D(mask)


def fill_exterior(
    img: Image2D,
    interior: BinaryMask2D,
    fill: float | str = "auto",
    reference: BinaryMask2D | None = None,
) -> Image2D:
    """Replace everything outside ``interior`` with a flat intensity.

    ``fill`` is either an explicit intensity or ``"auto"``, which uses
    the mean over a caller-designated fracture-free reference region.
    Interior pixels are never modified.
    """
    if interior.shape != img.shape:
        raise ValueError(f"interior mask {interior.shape} does not match image {img.shape}")
    if isinstance(fill, str):
        if fill != "auto":
            raise ValueError(f"fill must be a number or 'auto', got {fill!r}")
        if reference is None or not reference.data.any():
            raise ValueError("auto fill requires a non-empty reference region")
        if reference.shape != img.shape:
            raise ValueError(f"reference mask {reference.shape} does not match image {img.shape}")
        value = float(img.data[reference.data].mean())
    else:
        value = float(fill)
    out = img.data.copy()
    out[~interior.data] = value
    return Image2D(out, voxel_size=img.voxel_size)
