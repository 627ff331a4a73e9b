"""Synthetic fracture phantoms for desk-scale training and evaluation.

Tiles are a bright textured matrix crossed by dark, gently curving
fracture lines of 1-3 px aperture; the drawn line support is the ground
truth. Geometry, contrast and noise are all drawn from a seeded
generator so datasets are reproducible.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage


def _draw_fracture(gt: np.ndarray, rng: np.random.Generator) -> None:
    h, w = gt.shape
    horizontal = rng.random() < 0.5
    span = w if horizontal else h
    offset = rng.uniform(0.15, 0.85) * (h if horizontal else w)
    slope = rng.uniform(-0.35, 0.35)
    amplitude = rng.uniform(0.0, 0.08) * span
    period = rng.uniform(0.5, 2.0) * span
    phase = rng.uniform(0, 2 * np.pi)
    width = int(rng.integers(1, 4))
    for t in range(span):
        center = offset + slope * (t - span / 2) + amplitude * np.sin(2 * np.pi * t / period + phase)
        lo = int(np.floor(center - (width - 1) / 2))
        for d in range(width):
            c = lo + d
            if horizontal and 0 <= c < h:
                gt[c, t] = True
            elif not horizontal and 0 <= c < w:
                gt[t, c] = True


def fracture_tile(size: int, rng: np.random.Generator, max_lines: int = 3):
    """One (image, ground-truth) pair with 1..max_lines fractures."""
    gt = np.zeros((size, size), dtype=bool)
    for _ in range(int(rng.integers(1, max_lines + 1))):
        _draw_fracture(gt, rng)
    depth = rng.uniform(0.35, 0.5)
    img = np.full((size, size), 0.75)
    img[gt] -= depth
    img = ndimage.gaussian_filter(img, 0.6)
    img += rng.normal(0.0, 0.03, img.shape)
    return np.clip(img, 0.0, 1.0), gt


def make_fracture_tiles(count: int, size: int, seed: int = 0, max_lines: int = 3):
    """Stacked arrays (images, ground_truths) of shape (count, size, size)."""
    rng = np.random.default_rng(seed)
    images = np.empty((count, size, size))
    truths = np.empty((count, size, size), dtype=bool)
    for i in range(count):
        images[i], truths[i] = fracture_tile(size, rng, max_lines=max_lines)
    return images, truths
