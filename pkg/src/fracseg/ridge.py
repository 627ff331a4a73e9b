"""Multi-scale ridge enhancement from Hessian eigenvalue analysis.

Thin elongated structures have one near-zero and one large Hessian
eigenvalue; the response keeps the large eigenvalue's magnitude where
that relation holds and is zero elsewhere. Responses are scaled by
sigma^2 so maxima taken across scales are comparable, and the default
convention detects dark ridges on a bright matrix.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import ndimage

from .core import Image2D
from .kernels import gaussian_deriv1_kernel_1d, gaussian_deriv2_kernel_1d, gaussian_kernel_1d

BOUNDARY_MODE = "reflect"
_TINY_EIGENVALUE = 1e-12


@dataclass(frozen=True)
class HessianField:
    """Per-pixel symmetric 2x2 second-derivative matrices at one scale.

    The x axis runs along columns and y along rows; ixy is stored once.
    """

    ixx: np.ndarray
    ixy: np.ndarray
    iyy: np.ndarray
    sigma: float


def _validate_scales(scales: Sequence[float]) -> list[float]:
    values = [float(s) for s in scales]
    if not values:
        raise ValueError("scale list must not be empty")
    if any(s <= 0 for s in values):
        raise ValueError(f"scales must be positive, got {values}")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ValueError(f"scales must be strictly ascending, got {values}")
    return values


def gaussian_filter(img: Image2D, sigma_f: float, truncate: float = 4.0) -> Image2D:
    """Smooth with a normalized truncated Gaussian, reflect boundary."""
    g = gaussian_kernel_1d(sigma_f, truncate)
    out = ndimage.correlate1d(img.data, g, axis=0, mode=BOUNDARY_MODE)
    out = ndimage.correlate1d(out, g, axis=1, mode=BOUNDARY_MODE)
    return Image2D(out, voxel_size=img.voxel_size)


def hessian_field(img: Image2D, sigma_f: float, truncate: float = 4.0) -> HessianField:
    """Second-derivative-of-Gaussian responses (ixx, ixy, iyy) at one scale."""
    g = gaussian_kernel_1d(sigma_f, truncate)
    d1 = gaussian_deriv1_kernel_1d(sigma_f, truncate)
    d2 = gaussian_deriv2_kernel_1d(sigma_f, truncate)
    data = img.data
    ixx = ndimage.correlate1d(data, g, axis=0, mode=BOUNDARY_MODE)
    ixx = ndimage.correlate1d(ixx, d2, axis=1, mode=BOUNDARY_MODE)
    iyy = ndimage.correlate1d(data, d2, axis=0, mode=BOUNDARY_MODE)
    iyy = ndimage.correlate1d(iyy, g, axis=1, mode=BOUNDARY_MODE)
    ixy = ndimage.correlate1d(data, d1, axis=0, mode=BOUNDARY_MODE)
    ixy = ndimage.correlate1d(ixy, d1, axis=1, mode=BOUNDARY_MODE)
    return HessianField(ixx=ixx, ixy=ixy, iyy=iyy, sigma=float(sigma_f))


def _eigenvalues_by_magnitude(ixx: np.ndarray, ixy: np.ndarray, iyy: np.ndarray):
    """Closed-form symmetric 2x2 eigenvalues ordered by |small|, |large|.

    Ties at equal magnitude resolve to (negative, positive).
    """
    mean = 0.5 * (ixx + iyy)
    root = np.sqrt((0.5 * (ixx - iyy)) ** 2 + ixy**2)
    upper = mean + root
    lower = mean - root
    upper_dominates = np.abs(upper) >= np.abs(lower)
    lam2 = np.where(upper_dominates, upper, lower)
    lam1 = np.where(upper_dominates, lower, upper)
    return lam1, lam2


def hessian_eigenvalues(h) -> tuple[float, float]:
    """Eigenvalues of one symmetric 2x2 matrix, ordered by magnitude."""
    m = np.asarray(h, dtype=np.float64)
    if m.shape != (2, 2):
        raise ValueError(f"expected a 2x2 matrix, got shape {m.shape}")
    if not np.isfinite(m).all():
        raise ValueError("matrix entries must be finite")
    lam1, lam2 = _eigenvalues_by_magnitude(
        np.asarray(m[0, 0]), np.asarray(0.5 * (m[0, 1] + m[1, 0])), np.asarray(m[1, 1])
    )
    return float(lam1), float(lam2)


def sato_response(
    img: Image2D,
    sigma_f: float,
    alpha: float = 0.25,
    bright_ridges: bool = False,
    truncate: float = 4.0,
) -> Image2D:
    """Single-scale line-likeness response, sigma^2-normalized.

    Pixels where |lam1| <= alpha * |lam2| and lam2 has the ridge sign
    (positive for dark ridges, negative for bright ones) respond with
    sigma^2 * |lam2|; everything else, including constant regions, is 0.
    """
    field = hessian_field(img, sigma_f, truncate)
    lam1, lam2 = _eigenvalues_by_magnitude(field.ixx, field.ixy, field.iyy)
    sign_ok = lam2 < 0 if bright_ridges else lam2 > 0
    line_like = (np.abs(lam1) <= alpha * np.abs(lam2)) & sign_ok & (np.abs(lam2) > _TINY_EIGENVALUE)
    response = np.where(line_like, (sigma_f * sigma_f) * np.abs(lam2), 0.0)
    return Image2D(response, voxel_size=img.voxel_size)


def sato_multiscale(
    img: Image2D,
    scales: Sequence[float],
    alpha: float = 0.25,
    bright_ridges: bool = False,
    truncate: float = 4.0,
) -> Image2D:
    """Element-wise maximum of single-scale responses over all scales."""
    values = _validate_scales(scales)
    best = None
    for s in values:
        resp = sato_response(img, s, alpha=alpha, bright_ridges=bright_ridges, truncate=truncate).data
        best = resp if best is None else np.maximum(best, resp)
    return Image2D(best, voxel_size=img.voxel_size)
