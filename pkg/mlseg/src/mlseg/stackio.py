"""TIFF stack I/O following the shared on-disk conventions.

Stacks are directories of single-channel TIFFs in lexicographic slice
order; 16-bit files map to [0, 1] via 65535, 8-bit via 255, float files
pass through. Masks are 8-bit TIFFs with foreground = 255. These are the
same conventions the conventional-pipeline CLI reads and writes, which
is the interface between the two packages.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

TIFF_SUFFIXES = {".tif", ".tiff"}


class StackIOError(Exception):
    def __init__(self, message: str, path=None, slice_index=None):
        detail = message
        if path is not None:
            detail += f" [path={path}"
            if slice_index is not None:
                detail += f", slice={slice_index}"
            detail += "]"
        super().__init__(detail)
        self.path = path
        self.slice_index = slice_index


def list_slice_files(directory: str | Path) -> list[Path]:
    d = Path(directory)
    if not d.is_dir():
        raise StackIOError("stack directory not found", path=d)
    files = sorted(p for p in d.iterdir() if p.suffix.lower() in TIFF_SUFFIXES)
    if not files:
        raise StackIOError("no TIFF files in stack directory", path=d)
    return files


def read_slice(path: str | Path, slice_index: int | None = None) -> np.ndarray:
    p = Path(path)
    try:
        with Image.open(p) as im:
            arr = np.asarray(im)
    except Exception as err:
        raise StackIOError(f"cannot read slice: {err}", path=p, slice_index=slice_index) from err
    if arr.ndim != 2:
        raise StackIOError(f"expected single-channel image, got {arr.shape}", path=p, slice_index=slice_index)
    if arr.dtype == np.uint8:
        return arr.astype(np.float64) / 255.0
    if arr.dtype == np.uint16 or arr.dtype in (np.int32, np.uint32):
        return arr.astype(np.float64) / 65535.0
    if np.issubdtype(arr.dtype, np.floating):
        return arr.astype(np.float64)
    raise StackIOError(f"unsupported TIFF dtype {arr.dtype}", path=p, slice_index=slice_index)


def read_stack(directory: str | Path) -> list[np.ndarray]:
    return [read_slice(f, i) for i, f in enumerate(list_slice_files(directory))]


def read_mask_stack(directory: str | Path) -> list[np.ndarray]:
    return [s > 0.5 for s in read_stack(directory)]


def write_slice(data: np.ndarray, path: str | Path, dtype: str = "float32") -> None:
    p = Path(path)
    if dtype == "uint8":
        out = np.clip(np.rint(data * 255.0), 0, 255).astype(np.uint8)
    elif dtype == "uint16":
        out = np.clip(np.rint(data * 65535.0), 0, 65535).astype(np.uint16)
    elif dtype == "float32":
        out = data.astype(np.float32)
    else:
        raise ValueError(f"unsupported dtype {dtype!r}")
    try:
        Image.fromarray(out).save(p, format="TIFF")
    except OSError as err:
        raise StackIOError(f"cannot write slice: {err}", path=p) from err


def write_stack(slices, directory: str | Path, dtype: str = "float32") -> list[Path]:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, data in enumerate(slices):
        p = d / f"slice_{i:04d}.tif"
        write_slice(np.asarray(data, dtype=np.float64), p, dtype=dtype)
        paths.append(p)
    return paths


def write_mask_stack(masks, directory: str | Path) -> list[Path]:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, mask in enumerate(masks):
        p = d / f"mask_{i:04d}.tif"
        try:
            Image.fromarray(np.where(np.asarray(mask, bool), 255, 0).astype(np.uint8)).save(p, format="TIFF")
        except OSError as err:
            raise StackIOError(f"cannot write mask: {err}", path=p, slice_index=i) from err
        paths.append(p)
    return paths
