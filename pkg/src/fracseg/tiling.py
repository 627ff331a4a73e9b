"""Overlap-tile decomposition and exact reassembly of large slices.

Tiles of a fixed size are laid out at stride ``tile - overlap``; the last
tile per axis is shifted back so it ends exactly at the image edge, which
keeps every tile full-size at the cost of extra overlap. At merge time
each tile contributes its interior after dropping ``trim`` pixels per
inner edge, and contributions partition the image with no blending.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import Image2D


@dataclass(frozen=True)
class TileGrid:
    """Geometry of an overlap tiling of one slice."""

    image_width: int
    image_height: int
    tile: int = 400
    overlap: int = 72
    trim: int = 36
    origins: list[tuple[int, int]] = field(default_factory=list)

    def __post_init__(self):
        if self.tile <= self.overlap or self.overlap < 0:
            raise ValueError(f"require tile > overlap >= 0, got tile={self.tile}, overlap={self.overlap}")
        if self.trim < 0 or 2 * self.trim > self.overlap:
            raise ValueError(f"require 0 <= trim <= overlap/2, got trim={self.trim}, overlap={self.overlap}")

    @property
    def stride(self) -> int:
        return self.tile - self.overlap

    def __len__(self) -> int:
        return len(self.origins)


def _axis_origins(dim: int, tile: int, stride: int) -> list[int]:
    count = math.ceil((dim - tile) / stride) + 1
    origins = [min(k * stride, dim - tile) for k in range(count)]
    return origins


def plan_grid(width: int, height: int, tile: int = 400, overlap: int = 72, trim: int | None = None) -> TileGrid:
    """Plan tile origins covering a width x height slice.

    Tiles per axis = ceil((dim - tile) / stride) + 1 with stride =
    tile - overlap; the final origin per axis is back-shifted so the last
    tile ends at the image edge. Images smaller than one tile are
    rejected.
    """
    if trim is None:
        trim = overlap // 2
    if width < tile or height < tile:
        raise ValueError(f"image {width}x{height} smaller than one {tile}px tile")
    grid = TileGrid(image_width=width, image_height=height, tile=tile, overlap=overlap, trim=trim)
    xs = _axis_origins(width, tile, grid.stride)
    ys = _axis_origins(height, tile, grid.stride)
    origins = [(x, y) for y in ys for x in xs]
    return TileGrid(
        image_width=width, image_height=height, tile=tile, overlap=overlap, trim=trim, origins=origins
    )


def split(img: Image2D, grid: TileGrid) -> list[Image2D]:
    """Crop the planned tiles out of a slice; overlap bands share pixels."""
    if img.shape != (grid.image_height, grid.image_width):
        raise ValueError(
            f"grid planned for {grid.image_width}x{grid.image_height}, image is {img.width}x{img.height}"
        )
    t = grid.tile
    return [Image2D(img.data[y : y + t, x : x + t].copy(), voxel_size=img.voxel_size) for x, y in grid.origins]


def _ownership_spans(origins: list[int], tile: int, trim: int, dim: int) -> list[tuple[int, int]]:
    """Half-open [start, end) output spans per tile along one axis.

    Inner edges drop ``trim`` pixels; image-border edges are kept. A
    back-shifted final tile starts where the previous tile's span ended,
    preserving the exact partition.
    """
    spans = []
    prev_end = 0
    n = len(origins)
    for k, origin in enumerate(origins):
        start = 0 if k == 0 else max(origin + trim, prev_end)
        end = dim if k == n - 1 else origin + tile - trim
        spans.append((start, end))
        prev_end = end
    return spans


def merge(tiles: list[Image2D], grid: TileGrid) -> Image2D:
    """Reassemble tiles into the full slice using trimmed ownership regions."""
    if len(tiles) != len(grid.origins):
        raise ValueError(f"grid expects {len(grid.origins)} tiles, got {len(tiles)}")
    xs = sorted({x for x, _ in grid.origins})
    ys = sorted({y for _, y in grid.origins})
    x_spans = dict(zip(xs, _ownership_spans(xs, grid.tile, grid.trim, grid.image_width)))
    y_spans = dict(zip(ys, _ownership_spans(ys, grid.tile, grid.trim, grid.image_height)))
    out = np.empty((grid.image_height, grid.image_width), dtype=np.float64)
    for tile_img, (x, y) in zip(tiles, grid.origins):
        if tile_img.shape != (grid.tile, grid.tile):
            raise ValueError(f"tile at ({x}, {y}) has shape {tile_img.shape}, expected {grid.tile}x{grid.tile}")
        x0, x1 = x_spans[x]
        y0, y1 = y_spans[y]
        out[y0:y1, x0:x1] = tile_img.data[y0 - y : y1 - y, x0 - x : x1 - x]
    return Image2D(out)


def ownership_map(grid: TileGrid) -> np.ndarray:
    """Index of the tile owning each pixel after trimmed merging."""
    xs = sorted({x for x, _ in grid.origins})
    ys = sorted({y for _, y in grid.origins})
    x_spans = dict(zip(xs, _ownership_spans(xs, grid.tile, grid.trim, grid.image_width)))
    y_spans = dict(zip(ys, _ownership_spans(ys, grid.tile, grid.trim, grid.image_height)))
    owner = np.full((grid.image_height, grid.image_width), -1, dtype=np.int64)
    for idx, (x, y) in enumerate(grid.origins):
        x0, x1 = x_spans[x]
        y0, y1 = y_spans[y]
        owner[y0:y1, x0:x1] = idx
    return owner
