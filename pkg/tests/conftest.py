import numpy as np
import pytest

from fracseg import BinaryMask2D, Image2D


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def two_region_phantom(size=256, means=(0.2, 0.8), noise=0.1, seed=7):
    """Noisy two-region image with known ground truth (bright = truth)."""
    gen = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size]
    truth = ((xx - size * 0.35) ** 2 + (yy - size * 0.43) ** 2 < (size * 0.23) ** 2) | (
        (xx > size * 0.66) & (xx < size * 0.86) & (yy > size * 0.16) & (yy < size * 0.9)
    )
    data = np.where(truth, means[1], means[0]) + gen.normal(0.0, noise, (size, size))
    return Image2D(np.clip(data, 0.0, 1.0)), BinaryMask2D(truth)


def dark_line_phantom(size=512, row=None, width=3, depth=0.5, background=0.8, noise=0.0, seed=42):
    """Horizontal dark line on a flat field; returns (image, on-line mask)."""
    gen = np.random.default_rng(seed)
    data = np.full((size, size), background)
    if row is None:
        row = size // 2
    half = width // 2
    data[row - half : row - half + width, :] = background - depth
    on_line = np.zeros((size, size), dtype=bool)
    on_line[row - half : row - half + width, :] = True
    if noise:
        data = data + gen.normal(0.0, noise, data.shape)
    return Image2D(data), BinaryMask2D(on_line)


def dice(a: np.ndarray, b: np.ndarray) -> float:
    inter = int((a & b).sum())
    denom = int(a.sum()) + int(b.sum())
    return 1.0 if denom == 0 else 2.0 * inter / denom
