"""Per-pixel filter-bank features for the random-forest segmenter.

The bank combines smoothing (Gaussian blur per scale), edge detectors
(difference-of-Gaussians over consecutive scale pairs and Hessian
eigenvalue pairs per scale), and membrane detectors (rotated line-kernel
responses pooled by max and mean). Feature ordering is deterministic and
recorded by name.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

MEMBRANE_DIRECTIONS = 30
MEMBRANE_LENGTH = 19


@dataclass(frozen=True)
class FeatureStack:
    """(height, width, n_features) filter responses plus their names."""

    data: np.ndarray
    names: tuple[str, ...]

    def __post_init__(self):
        if self.data.ndim != 3 or self.data.shape[2] != len(self.names):
            raise ValueError("feature data must be (h, w, n) matching names")
        if not np.isfinite(self.data).all():
            raise ValueError("features must be finite")

    @property
    def count(self) -> int:
        return self.data.shape[2]

    def matrix(self) -> np.ndarray:
        return self.data.reshape(-1, self.count)


def _gauss_kernels_1d(sigma: float, truncate: float = 4.0):
    """Smoothing plus moment-corrected 1st/2nd derivative kernels.

    Correcting the discrete moments keeps the derivative responses of
    constant and linear ramps at zero instead of leaking the truncation
    error.
    """
    half = int(np.floor(truncate * sigma + 0.5))
    u = np.arange(-half, half + 1, dtype=np.float64)
    g = np.exp(-(u * u) / (2.0 * sigma * sigma))
    g /= g.sum()
    m2 = float(np.sum(u * u * g))
    m4 = float(np.sum(u**4 * g))
    d1 = u * g / m2
    d2 = 2.0 * g * (u * u - m2) / (m4 - m2 * m2)
    return g, d1, d2 - d2.sum() / d2.size


def _hessian_eigenvalues(img: np.ndarray, sigma: float):
    g, d1, d2 = _gauss_kernels_1d(sigma)
    ixx = ndimage.correlate1d(ndimage.correlate1d(img, g, axis=0, mode="reflect"), d2, axis=1, mode="reflect")
    iyy = ndimage.correlate1d(ndimage.correlate1d(img, d2, axis=0, mode="reflect"), g, axis=1, mode="reflect")
    ixy = ndimage.correlate1d(ndimage.correlate1d(img, d1, axis=0, mode="reflect"), d1, axis=1, mode="reflect")
    mean = 0.5 * (ixx + iyy)
    root = np.sqrt((0.5 * (ixx - iyy)) ** 2 + ixy**2)
    return mean - root, mean + root


def membrane_kernels(length: int = MEMBRANE_LENGTH, directions: int = MEMBRANE_DIRECTIONS):
    """Rotated mean-normalized line kernels covering a half turn."""
    base = np.zeros((length, length))
    base[length // 2, :] = 1.0
    kernels = []
    for k in range(directions):
        angle = 180.0 * k / directions
        rotated = ndimage.rotate(base, angle, reshape=False, order=1)
        total = rotated.sum()
        kernels.append(rotated / total)
    return kernels


def feature_stack(img: np.ndarray, scales) -> FeatureStack:
    """Deterministically ordered filter-bank responses for one slice."""
    values = [float(s) for s in scales]
    if not values or any(s <= 0 for s in values):
        raise ValueError(f"scales must be positive and non-empty, got {scales}")
    data = np.asarray(img, dtype=np.float64)
    planes = []
    names = []

    blurred = {}
    for s in values:
        blurred[s] = ndimage.gaussian_filter(data, s, mode="reflect")
        planes.append(blurred[s])
        names.append(f"gaussian:{s:g}")
        lo, hi = _hessian_eigenvalues(data, s)
        planes.append(lo)
        names.append(f"hessian_low:{s:g}")
        planes.append(hi)
        names.append(f"hessian_high:{s:g}")

    for a, b in zip(values, values[1:]):
        planes.append(blurred[a] - blurred[b])
        names.append(f"dog:{a:g}-{b:g}")

    responses = np.stack(
        [ndimage.correlate(data, k, mode="reflect") for k in membrane_kernels()], axis=0
    )
    planes.append(responses.max(axis=0))
    names.append("membrane_max")
    planes.append(responses.mean(axis=0))
    names.append("membrane_mean")

    return FeatureStack(data=np.stack(planes, axis=-1), names=tuple(names))


def expected_feature_count(scales) -> int:
    """3 per scale (blur + 2 Hessian) + consecutive DoG pairs + 2 membrane."""
    n = len(list(scales))
    return 3 * n + (n - 1) + 2
