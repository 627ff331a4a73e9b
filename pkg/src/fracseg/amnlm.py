"""Adaptive-manifolds non-local-means denoising of a single slice.

Each pixel is described by a Gaussian-weighted patch vector reduced to a
few PCA dimensions. A binary tree of smooth "manifolds" is grown in that
feature space: every node attracts pixels with Gaussian range weights
(splatting), the weighted image is low-pass filtered on a down-scaled
grid (blurring), and children are spawned by splitting pixels above and
below the node. The final intensity is the weight-normalized sum over
all nodes (slicing), which makes the output a convex combination of
input intensities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .core import Image2D
from .kernels import gaussian_kernel, kernel_half_width

__all__ = [
    "AmnlmParams",
    "PatchFeatures",
    "ManifoldSet",
    "gaussian_kernel",
    "low_pass_filter",
    "downscale_factor",
    "manifold_count",
    "build_patch_features",
    "amnlm_denoise",
]

_DENOM_EPS = 1e-12
_ZERO_COVARIANCE = 1e-18


@dataclass(frozen=True)
class AmnlmParams:
    """Filter parameters: spatial / range / patch sigmas and PCA size."""

    sigma_s: float = 8.0
    sigma_r: float = 0.2
    sigma_f: float = 1.0
    pca_dims: int = 3
    truncate: float = 4.0
    feedback_lowpass: bool = False

    def __post_init__(self):
        if self.sigma_s <= 0 or self.sigma_r <= 0 or self.sigma_f <= 0:
            raise ValueError("sigma_s, sigma_r and sigma_f must all be positive")
        if self.pca_dims < 1:
            raise ValueError(f"pca_dims must be >= 1, got {self.pca_dims}")


@dataclass(frozen=True)
class PatchFeatures:
    """Per-pixel weighted-patch vectors after PCA reduction.

    ``features`` has shape (height, width, dims); ``basis`` holds the
    retained principal directions as columns in patch space.
    """

    features: np.ndarray
    basis: np.ndarray

    @property
    def dims(self) -> int:
        return self.features.shape[2]


@dataclass(frozen=True)
class ManifoldSet:
    """Manifolds visited during a denoise run (one array per tree node)."""

    manifolds: list[np.ndarray]
    tree_height: int
    count: int

    def __post_init__(self):
        if self.count != 2**self.tree_height - 1:
            raise ValueError(
                f"count {self.count} inconsistent with tree height {self.tree_height}"
            )
        if len(self.manifolds) != self.count:
            raise ValueError("manifold list length must equal count")


def low_pass_filter(signal, sigma_s: float, feedback: bool = False) -> np.ndarray:
    """One-directional exponential low pass of a 1D signal.

    out[0] = in[0]; out[i] = in[i] + a * (in[i-1] - in[i]) with
    a = exp(-sqrt(2)/sigma_s). The default blends each sample with its
    *input* predecessor; ``feedback=True`` switches to the classical
    recursive form that blends with the already-filtered predecessor.
    """
    x = np.asarray(signal, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("low_pass_filter expects a non-empty 1D signal")
    if sigma_s <= 0:
        raise ValueError(f"sigma_s must be positive, got {sigma_s}")
    a = math.exp(-math.sqrt(2.0) / sigma_s)
    out = x.copy()
    if feedback:
        for i in range(1, x.size):
            out[i] = x[i] + a * (out[i - 1] - x[i])
    else:
        out[1:] = x[1:] + a * (x[:-1] - x[1:])
    return out


def downscale_factor(sigma_s: float, sigma_r: float) -> int:
    """Integer down-scaling factor for the blur grid (minimum 1)."""
    if sigma_s <= 0 or sigma_r <= 0:
        raise ValueError("sigma_s and sigma_r must be positive")
    return max(1, 2 * math.floor(math.log2(min(sigma_s / 4.0, 256.0 * sigma_r))))


def manifold_count(sigma_s: float, sigma_r: float) -> tuple[int, int]:
    """Tree height h and total manifold count K = 2^h - 1."""
    if sigma_s <= 0 or sigma_r <= 0:
        raise ValueError("sigma_s and sigma_r must be positive")
    height = 2 + max(2, math.ceil((math.floor(math.log2(sigma_s)) - 1) * (1.0 - sigma_r)))
    return height, 2**height - 1


def _fix_sign(vectors: np.ndarray) -> np.ndarray:
    """Make each eigenvector column's largest-magnitude entry positive."""
    out = vectors.copy()
    for j in range(out.shape[1]):
        col = out[:, j]
        pivot = col[np.argmax(np.abs(col))]
        if pivot < 0:
            out[:, j] = -col
    return out


def build_patch_features(img: Image2D, params: AmnlmParams) -> PatchFeatures:
    """Gaussian-weighted patch vectors projected onto the top PCA axes.

    The covariance is taken over all pixels' weighted patches; a
    zero-covariance (constant) image falls back to the canonical first
    axes of patch space so the result stays deterministic.
    """
    if img.data.size == 0:
        raise ValueError("empty input")
    half = kernel_half_width(params.sigma_f, params.truncate)
    weights = gaussian_kernel(params.sigma_f, params.truncate).ravel()
    dim = weights.size
    if params.pca_dims > dim:
        raise ValueError(f"pca_dims={params.pca_dims} exceeds patch dimension {dim}")
    h, w = img.shape
    padded = np.pad(img.data, half, mode="symmetric")
    patches = sliding_window_view(padded, (2 * half + 1, 2 * half + 1)).reshape(h * w, dim).copy()
    patches *= weights
    mean = patches.mean(axis=0)
    centered = patches - mean
    cov = centered.T @ centered
    if np.abs(cov).max() < _ZERO_COVARIANCE:
        basis = np.eye(dim)[:, : params.pca_dims]
    else:
        eigvals, eigvecs = np.linalg.eigh(cov)
        order = np.argsort(eigvals)[::-1][: params.pca_dims]
        basis = _fix_sign(eigvecs[:, order])
    features = (patches @ basis).reshape(h, w, params.pca_dims)
    return PatchFeatures(features=features, basis=basis)


def _lowpass_axis(arr: np.ndarray, a: float, axis: int, feedback: bool) -> np.ndarray:
    moved = np.moveaxis(arr, axis, 0)
    out = moved.copy()
    if feedback:
        for i in range(1, moved.shape[0]):
            out[i] = moved[i] + a * (out[i - 1] - moved[i])
    else:
        out[1:] = moved[1:] + a * (moved[:-1] - moved[1:])
    return np.moveaxis(out, 0, axis)


def _lowpass_2d(arr: np.ndarray, sigma_s: float, feedback: bool) -> np.ndarray:
    """Single-direction low pass along rows then columns."""
    a = math.exp(-math.sqrt(2.0) / sigma_s)
    out = _lowpass_axis(arr, a, axis=1, feedback=feedback)
    return _lowpass_axis(out, a, axis=0, feedback=feedback)


def _blur_2d(arr: np.ndarray, sigma_s: float, feedback: bool) -> np.ndarray:
    """Symmetric recursive blur: forward and backward along each axis."""
    a = math.exp(-math.sqrt(2.0) / sigma_s)
    out = arr
    for axis in (1, 0):
        out = _lowpass_axis(out, a, axis=axis, feedback=feedback)
        out = np.flip(_lowpass_axis(np.flip(out, axis=axis), a, axis=axis, feedback=feedback), axis=axis)
    return out


def _downscale(arr: np.ndarray, factor: int) -> np.ndarray:
    """Block-average down-scaling with edge padding to a full block grid."""
    if factor == 1:
        return arr
    h, w = arr.shape[:2]
    pad_h = (-h) % factor
    pad_w = (-w) % factor
    pad = ((0, pad_h), (0, pad_w)) + ((0, 0),) * (arr.ndim - 2)
    padded = np.pad(arr, pad, mode="edge")
    hp, wp = padded.shape[:2]
    blocks = padded.reshape((hp // factor, factor, wp // factor, factor) + padded.shape[2:])
    return blocks.mean(axis=(1, 3))


def _upscale_bilinear(arr: np.ndarray, height: int, width: int) -> np.ndarray:
    """Bilinear up-scaling to (height, width) with half-pixel alignment."""
    h, w = arr.shape[:2]
    if (h, w) == (height, width):
        return arr
    ys = np.clip((np.arange(height) + 0.5) * (h / height) - 0.5, 0.0, h - 1.0)
    xs = np.clip((np.arange(width) + 0.5) * (w / width) - 0.5, 0.0, w - 1.0)
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0).reshape(-1, 1)
    fx = (xs - x0).reshape(1, -1)
    if arr.ndim == 3:
        fy = fy[..., None]
        fx = fx[..., None]
    top = arr[np.ix_(y0, x0)] * (1 - fx) + arr[np.ix_(y0, x1)] * fx
    bottom = arr[np.ix_(y1, x0)] * (1 - fx) + arr[np.ix_(y1, x1)] * fx
    return top * (1 - fy) + bottom * fy


def _dominant_direction(diff: np.ndarray) -> np.ndarray:
    """Principal direction of the (centered) feature differences."""
    flat = diff.reshape(-1, diff.shape[-1])
    centered = flat - flat.mean(axis=0)
    cov = centered.T @ centered
    if np.abs(cov).max() < _ZERO_COVARIANCE:
        direction = np.zeros(diff.shape[-1])
        direction[0] = 1.0
        return direction
    eigvals, eigvecs = np.linalg.eigh(cov)
    return _fix_sign(eigvecs[:, [np.argmax(eigvals)]])[:, 0]


def amnlm_denoise(
    img: Image2D, params: AmnlmParams | None = None, return_stats: bool = False
) -> Image2D | tuple[Image2D, ManifoldSet]:
    """Denoise one slice with the full manifold-tree pipeline.

    Output intensities are confined to the input range. With
    ``return_stats=True`` the visited manifolds are returned as well,
    which is mainly useful for diagnostics and tests.
    """
    if params is None:
        params = AmnlmParams()
    if img.data.size == 0:
        raise ValueError("empty input")
    intensities = img.data
    h, w = img.shape
    feats = build_patch_features(img, params).features
    factor = downscale_factor(params.sigma_s, params.sigma_r)
    tree_height, expected_count = manifold_count(params.sigma_s, params.sigma_r)
    sigma_small = params.sigma_s / factor
    feedback = params.feedback_lowpass
    inv_two_sigma_r2 = 1.0 / (2.0 * params.sigma_r * params.sigma_r)

    def smooth_on_grid(field: np.ndarray) -> np.ndarray:
        return _upscale_bilinear(
            _lowpass_2d(_downscale(field, factor), sigma_small, feedback), h, w
        )

    numerator = np.zeros((h, w))
    denominator = np.zeros((h, w))
    visited = 0
    stored: list[np.ndarray] = []

    def visit(manifold: np.ndarray, level: int) -> None:
        nonlocal visited
        visited += 1
        if return_stats:
            stored.append(manifold)
        dist2 = ((feats - manifold) ** 2).sum(axis=2)
        splat = np.exp(-dist2 * inv_two_sigma_r2)
        blurred_weights = _upscale_bilinear(
            _blur_2d(_downscale(splat, factor), sigma_small, feedback), h, w
        )
        blurred_values = _upscale_bilinear(
            _blur_2d(_downscale(splat * intensities, factor), sigma_small, feedback), h, w
        )
        numerator[:] += blurred_values * splat
        denominator[:] += blurred_weights * splat
        if level >= tree_height:
            return
        diff = feats - manifold
        direction = _dominant_direction(diff)
        below = (diff @ direction) < 0
        manifold_small = _downscale(manifold, factor)
        for cluster in (below, ~below):
            cluster_weight = cluster * (1.0 - splat)
            child_num = _lowpass_2d(_downscale(cluster_weight[..., None] * feats, factor), sigma_small, feedback)
            child_den = _lowpass_2d(_downscale(cluster_weight, factor), sigma_small, feedback)
            safe = np.abs(child_den) > _DENOM_EPS
            child = np.where(safe[..., None], child_num / np.where(safe, child_den, 1.0)[..., None], manifold_small)
            visit(_upscale_bilinear(child, h, w), level + 1)

    first = smooth_on_grid(feats)
    visit(first, 1)

    if visited != expected_count:
        raise AssertionError(f"visited {visited} manifolds, expected {expected_count}")
    safe = denominator > _DENOM_EPS
    result = np.where(safe, numerator / np.where(safe, denominator, 1.0), intensities)
    result = np.clip(result, intensities.min(), intensities.max())
    out = Image2D(result, voxel_size=img.voxel_size)
    if return_stats:
        return out, ManifoldSet(manifolds=stored, tree_height=tree_height, count=visited)
    return out
