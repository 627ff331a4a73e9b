"""Truncated Gaussian kernels and their discrete derivative variants.

Kernels are sampled on integer offsets within a half-width of
floor(truncate * sigma + 0.5). Derivative kernels are moment-corrected:
the discrete variance replaces sigma^2 and the scale is fixed so that
the zeroth/second moments are exact, which makes Hessian responses on
quadratic ramps exact instead of drifting with the truncation error.
"""

from __future__ import annotations

import numpy as np


def kernel_half_width(sigma: float, truncate: float = 4.0) -> int:
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if truncate <= 0:
        raise ValueError(f"truncate must be positive, got {truncate}")
    return int(np.floor(truncate * sigma + 0.5))


def gaussian_kernel_1d(sigma: float, truncate: float = 4.0) -> np.ndarray:
    """Normalized 1D Gaussian over offsets [-l, l], summing to 1."""
    l = kernel_half_width(sigma, truncate)
    u = np.arange(-l, l + 1, dtype=np.float64)
    g = np.exp(-(u * u) / (2.0 * sigma * sigma))
    return g / g.sum()


def gaussian_kernel(sigma_f: float, truncate: float = 4.0) -> np.ndarray:
    """Normalized square 2D Gaussian kernel.

    The kernel has half-width floor(truncate * sigma_f + 0.5) per axis and
    is divided by its element sum, so any amplitude prefactor cancels.
    """
    g = gaussian_kernel_1d(sigma_f, truncate)
    kernel = np.outer(g, g)
    return kernel / kernel.sum()


def gaussian_deriv1_kernel_1d(sigma: float, truncate: float = 4.0) -> np.ndarray:
    """First-derivative-of-Gaussian kernel for correlation.

    Correlating a linear ramp with this kernel yields slope exactly 1:
    the kernel is odd and its first moment is normalized to 1.
    """
    l = kernel_half_width(sigma, truncate)
    u = np.arange(-l, l + 1, dtype=np.float64)
    g = gaussian_kernel_1d(sigma, truncate)
    m2 = float(np.sum(u * u * g))
    if m2 <= 0:
        raise ValueError(f"kernel support too small for a derivative at sigma={sigma}")
    return u * g / m2


def gaussian_deriv2_kernel_1d(sigma: float, truncate: float = 4.0) -> np.ndarray:
    """Second-derivative-of-Gaussian kernel for correlation.

    Zeroth moment is forced to 0 and second moment to 2, so correlating
    x^2 yields exactly 2 and constants map to 0.
    """
    l = kernel_half_width(sigma, truncate)
    u = np.arange(-l, l + 1, dtype=np.float64)
    g = gaussian_kernel_1d(sigma, truncate)
    m2 = float(np.sum(u * u * g))
    m4 = float(np.sum(u**4 * g))
    denom = m4 - m2 * m2
    if denom <= 0:
        raise ValueError(f"kernel support too small for a second derivative at sigma={sigma}")
    k = 2.0 * g * (u * u - m2) / denom
    return k - k.sum() / k.size
