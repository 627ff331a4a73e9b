"""Core image/volume data types, intensity normalization, and histograms.

All images are single-channel rasters stored row-major as 2D float arrays.
Working intensities live in [0, 1]; integer inputs are converted at load
time (see :mod:`fracseg.stackio`). Histograms are fixed at 256 bins to
match the 8-bit working format used throughout the toolkit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

N_BINS = 256


@dataclass(frozen=True)
class Image2D:
    """Single-channel 2D image.

    Parameters
    ----------
    data : ndarray
        Row-major intensity matrix, coerced to float64. Must be 2D and
        finite everywhere.
    voxel_size : float, optional
        Physical edge length of one pixel in micrometers.
    """

    data: np.ndarray
    voxel_size: float | None = None

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"Image2D expects a 2D array, got shape {arr.shape}")
        if arr.size and not np.isfinite(arr).all():
            raise ValueError("Image2D intensities must be finite")
        object.__setattr__(self, "data", arr)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape


@dataclass(frozen=True)
class BinaryMask2D:
    """Per-pixel boolean classification (True = fracture/foreground)."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 2:
            raise ValueError(f"BinaryMask2D expects a 2D array, got shape {arr.shape}")
        object.__setattr__(self, "data", arr.astype(bool))

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def count(self) -> int:
        return int(self.data.sum())


@dataclass(frozen=True)
class VolumeStack:
    """Ordered list of co-registered slices forming a 3D dataset.

    Slice order is ascending along the scan axis; every slice must share
    the same width and height.
    """

    slices: list[Image2D] = field(default_factory=list)
    slice_spacing: float | None = None

    def __post_init__(self):
        shapes = {s.shape for s in self.slices}
        if len(shapes) > 1:
            raise ValueError(f"all slices must share one shape, got {sorted(shapes)}")

    def __len__(self) -> int:
        return len(self.slices)

    def __iter__(self):
        return iter(self.slices)

    def to_array(self) -> np.ndarray:
        """Stack slices into a (depth, height, width) array."""
        return np.stack([s.data for s in self.slices], axis=0)


@dataclass(frozen=True)
class MaskStack:
    """Ordered list of binary masks, one per slice."""

    masks: list[BinaryMask2D] = field(default_factory=list)

    def __post_init__(self):
        shapes = {m.shape for m in self.masks}
        if len(shapes) > 1:
            raise ValueError(f"all masks must share one shape, got {sorted(shapes)}")

    def __len__(self) -> int:
        return len(self.masks)

    def __iter__(self):
        return iter(self.masks)

    def to_array(self) -> np.ndarray:
        return np.stack([m.data for m in self.masks], axis=0)


@dataclass(frozen=True)
class Histogram:
    """256-bin intensity histogram over [0, 1]."""

    bins: np.ndarray
    total: int

    def __post_init__(self):
        arr = np.asarray(self.bins, dtype=np.int64)
        if arr.shape != (N_BINS,):
            raise ValueError(f"histogram must have {N_BINS} bins, got {arr.shape}")
        if int(arr.sum()) != int(self.total):
            raise ValueError("histogram bin counts must sum to total")
        object.__setattr__(self, "bins", arr)
        object.__setattr__(self, "total", int(self.total))


def bin_index(values: np.ndarray) -> np.ndarray:
    """Map intensities in [0, 1] to 256-bin indices.

    Bin k covers [k/256, (k+1)/256); the last bin is closed so that 1.0
    lands in bin 255.
    """
    idx = np.floor(np.asarray(values, dtype=np.float64) * N_BINS).astype(np.int64)
    return np.clip(idx, 0, N_BINS - 1)


def compute_histogram(img: Image2D) -> Histogram:
    """Count pixels into 256 equal-width intensity bins over [0, 1]."""
    if img.data.size == 0:
        raise ValueError("empty input")
    counts = np.bincount(bin_index(img.data).ravel(), minlength=N_BINS)
    return Histogram(bins=counts, total=int(img.data.size))


def normalize_intensities(img: Image2D, low_pct: float = 0.01, high_pct: float = 0.99) -> Image2D:
    """Percentile-clipped affine rescale of intensities into [0, 1].

    Values at or below the ``low_pct`` quantile map to 0, values at or
    above the ``high_pct`` quantile map to 1, linear in between. A
    degenerate range (max == min over the clip window) maps every pixel
    to 0.5.

    Parameters
    ----------
    img : Image2D
        Input image; may carry raw (e.g. 16-bit) intensity values.
    low_pct, high_pct : float
        Quantile fractions with 0 <= low_pct < high_pct <= 1.
    """
    if img.data.size == 0:
        raise ValueError("empty input")
    if not (0.0 <= low_pct < high_pct <= 1.0):
        raise ValueError(f"require 0 <= low_pct < high_pct <= 1, got {low_pct}, {high_pct}")
    lo = float(np.quantile(img.data, low_pct))
    hi = float(np.quantile(img.data, high_pct))
    if hi <= lo:
        out = np.full_like(img.data, 0.5)
    else:
        out = np.clip((img.data - lo) / (hi - lo), 0.0, 1.0)
    return Image2D(out, voxel_size=img.voxel_size)


def equalize_histogram(img: Image2D) -> Image2D:
    """Remap intensities through the image's own 256-bin CDF.

    The mapping is monotone non-decreasing and lands in [0, 1]; an image
    with a perfectly uniform histogram is reproduced to within one bin
    width.
    """
    if img.data.size == 0:
        raise ValueError("empty input")
    hist = compute_histogram(img)
    cdf = np.cumsum(hist.bins) / hist.total
    out = cdf[bin_index(img.data)]
    return Image2D(out, voxel_size=img.voxel_size)
