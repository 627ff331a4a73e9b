"""Overlap-tile geometry for tiled inference.

Tiles are laid out at stride tile - overlap with the last tile per axis
back-shifted to end at the image edge; merging drops ``trim`` pixels per
inner tile edge and partitions the image exactly, matching the
conventional pipeline's `tiles` command geometry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class TileGrid:
    image_width: int
    image_height: int
    tile: int = 400
    overlap: int = 72
    trim: int = 36
    origins: list[tuple[int, int]] = field(default_factory=list)

    def __post_init__(self):
        if self.tile <= self.overlap or self.overlap < 0:
            raise ValueError(f"require tile > overlap >= 0, got {self.tile}, {self.overlap}")
        if self.trim < 0 or 2 * self.trim > self.overlap:
            raise ValueError(f"require 0 <= trim <= overlap/2, got trim={self.trim}")

    def __len__(self) -> int:
        return len(self.origins)


def plan_grid(width: int, height: int, tile: int = 400, overlap: int = 72, trim: int | None = None) -> TileGrid:
    if trim is None:
        trim = overlap // 2
    if width < tile or height < tile:
        raise ValueError(f"image {width}x{height} smaller than one {tile}px tile")
    stride = tile - overlap

    def axis(dim):
        count = math.ceil((dim - tile) / stride) + 1
        return [min(k * stride, dim - tile) for k in range(count)]

    origins = [(x, y) for y in axis(height) for x in axis(width)]
    return TileGrid(image_width=width, image_height=height, tile=tile, overlap=overlap, trim=trim, origins=origins)


def split(data: np.ndarray, grid: TileGrid) -> list[np.ndarray]:
    if data.shape != (grid.image_height, grid.image_width):
        raise ValueError(f"grid planned for {grid.image_width}x{grid.image_height}, got {data.shape}")
    t = grid.tile
    return [data[y : y + t, x : x + t].copy() for x, y in grid.origins]


def _spans(origins: list[int], tile: int, trim: int, dim: int) -> list[tuple[int, int]]:
    spans = []
    prev_end = 0
    for k, origin in enumerate(origins):
        start = 0 if k == 0 else max(origin + trim, prev_end)
        end = dim if k == len(origins) - 1 else origin + tile - trim
        spans.append((start, end))
        prev_end = end
    return spans


def merge(tiles: list[np.ndarray], grid: TileGrid) -> np.ndarray:
    if len(tiles) != len(grid.origins):
        raise ValueError(f"grid expects {len(grid.origins)} tiles, got {len(tiles)}")
    xs = sorted({x for x, _ in grid.origins})
    ys = sorted({y for _, y in grid.origins})
    x_spans = dict(zip(xs, _spans(xs, grid.tile, grid.trim, grid.image_width)))
    y_spans = dict(zip(ys, _spans(ys, grid.tile, grid.trim, grid.image_height)))
    out = np.empty((grid.image_height, grid.image_width), dtype=np.float64)
    for tile_data, (x, y) in zip(tiles, grid.origins):
        if tile_data.shape != (grid.tile, grid.tile):
            raise ValueError(f"tile at ({x}, {y}) has shape {tile_data.shape}")
        x0, x1 = x_spans[x]
        y0, y1 = y_spans[y]
        out[y0:y1, x0:x1] = tile_data[y0 - y : y1 - y, x0 - x : x1 - x]
    return out
