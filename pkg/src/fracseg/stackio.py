"""Stack I/O: TIFF slice directories and packed binary mask volumes.

Input stacks are directories of single-channel TIFF files; lexicographic
filename order defines slice order. 16-bit files are divided by 65535 and
8-bit files by 255 so that all in-memory intensities live in [0, 1];
32-bit float TIFFs (used for filter response maps) are passed through
unchanged.

Mask stacks are written either as 8-bit TIFFs (0/255) or as a packed
1-bit raw volume next to a small plain-text header carrying width,
height, depth and voxel size.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
from PIL import Image

from .core import BinaryMask2D, Image2D, MaskStack, VolumeStack

TIFF_SUFFIXES = {".tif", ".tiff"}


class StackIOError(Exception):
    """Raised when a stack cannot be read or written.

    Carries the offending file path and slice index so batch jobs can
    report exactly which slice failed.
    """

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
    """TIFF files of a stack directory in lexicographic (slice) order."""
    d = Path(directory)
    if not d.is_dir():
        raise StackIOError("stack directory not found", path=d)
    files = sorted(p for p in d.iterdir() if p.suffix.lower() in TIFF_SUFFIXES)
    if not files:
        raise StackIOError("no TIFF files in stack directory", path=d)
    return files


def _to_unit_range(arr: np.ndarray, path: Path) -> np.ndarray:
    if arr.dtype == np.uint8:
        return arr.astype(np.float64) / 255.0
    if arr.dtype == np.uint16:
        return arr.astype(np.float64) / 65535.0
    if arr.dtype in (np.int32, np.uint32):
        # PIL reports some 16-bit TIFFs as mode "I"; treat as 16-bit range.
        if arr.max(initial=0) > 65535:
            raise StackIOError(f"unsupported integer range (max {arr.max()})", path=path)
        return arr.astype(np.float64) / 65535.0
    if np.issubdtype(arr.dtype, np.floating):
        return arr.astype(np.float64)
    raise StackIOError(f"unsupported TIFF dtype {arr.dtype}", path=path)


def read_image(path: str | Path, slice_index: int | None = None) -> Image2D:
    """Read one grayscale TIFF slice into a unit-range Image2D."""
    p = Path(path)
    try:
        with Image.open(p) as im:
            arr = np.asarray(im)
    except Exception as err:
        raise StackIOError(f"cannot read slice: {err}", path=p, slice_index=slice_index) from err
    if arr.ndim != 2:
        raise StackIOError(
            f"expected single-channel image, got shape {arr.shape}", path=p, slice_index=slice_index
        )
    return Image2D(_to_unit_range(arr, p))


def read_stack(directory: str | Path, voxel_size: float | None = None) -> VolumeStack:
    """Read a directory of TIFF slices into a VolumeStack."""
    files = list_slice_files(directory)
    slices = []
    for i, f in enumerate(files):
        img = read_image(f, slice_index=i)
        if voxel_size is not None:
            img = Image2D(img.data, voxel_size=voxel_size)
        slices.append(img)
    try:
        return VolumeStack(slices=slices, slice_spacing=voxel_size)
    except ValueError as err:
        raise StackIOError(f"inconsistent slice shapes: {err}", path=Path(directory)) from err


def write_image(img: Image2D, path: str | Path, dtype: str = "uint16") -> None:
    """Write one slice as a grayscale TIFF (uint8, uint16 or float32)."""
    p = Path(path)
    data = img.data
    try:
        if dtype == "uint8":
            out = np.clip(np.rint(data * 255.0), 0, 255).astype(np.uint8)
        elif dtype == "uint16":
            out = np.clip(np.rint(data * 65535.0), 0, 65535).astype(np.uint16)
        elif dtype == "float32":
            out = data.astype(np.float32)
        else:
            raise ValueError(f"unsupported dtype {dtype!r}")
        Image.fromarray(out).save(p, format="TIFF")
    except (OSError, ValueError) as err:
        raise StackIOError(f"cannot write slice: {err}", path=p) from err


def write_stack(stack: VolumeStack, directory: str | Path, dtype: str = "uint16") -> list[Path]:
    """Write a VolumeStack as numbered TIFF slices; returns written paths."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    digits = max(4, len(str(max(len(stack) - 1, 0))))
    paths = []
    for i, img in enumerate(stack):
        p = d / f"slice_{i:0{digits}d}.tif"
        try:
            write_image(img, p, dtype=dtype)
        except StackIOError as err:
            raise StackIOError(str(err), path=p, slice_index=i) from err
        paths.append(p)
    return paths


def read_mask(path: str | Path, slice_index: int | None = None) -> BinaryMask2D:
    img = read_image(path, slice_index=slice_index)
    return BinaryMask2D(img.data > 0.5)


def read_mask_stack(directory: str | Path) -> MaskStack:
    """Read a directory of 0/255 TIFF masks."""
    files = list_slice_files(directory)
    return MaskStack(masks=[read_mask(f, slice_index=i) for i, f in enumerate(files)])


def write_mask_stack(masks: MaskStack, directory: str | Path) -> list[Path]:
    """Write masks as 8-bit TIFFs with foreground = 255."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    digits = max(4, len(str(max(len(masks) - 1, 0))))
    paths = []
    for i, mask in enumerate(masks):
        p = d / f"mask_{i:0{digits}d}.tif"
        try:
            Image.fromarray(np.where(mask.data, 255, 0).astype(np.uint8)).save(p, format="TIFF")
        except OSError as err:
            raise StackIOError(f"cannot write mask: {err}", path=p, slice_index=i) from err
        paths.append(p)
    return paths


def write_packed_masks(
    masks: MaskStack, basepath: str | Path, voxel_size: float | None = None
) -> tuple[Path, Path]:
    """Write a mask stack as 1-bit packed raw plus a plain-text header.

    ``basepath`` gains ``.raw`` (packed bits, row-major then slice-major)
    and ``.hdr`` (text header) suffixes. Returns (header_path, raw_path).
    """
    if len(masks) == 0:
        raise StackIOError("cannot write empty mask stack", path=Path(basepath))
    base = Path(basepath)
    base.parent.mkdir(parents=True, exist_ok=True)
    raw_path = base.with_suffix(".raw")
    hdr_path = base.with_suffix(".hdr")
    flat = masks.to_array().ravel()
    packed = np.packbits(flat)
    h, w = masks.masks[0].shape
    header = (
        "format: packed-bits-v1\n"
        f"width: {w}\n"
        f"height: {h}\n"
        f"depth: {len(masks)}\n"
        f"voxel_size_um: {voxel_size if voxel_size is not None else math.nan}\n"
        "bit_order: big\n"
    )
    try:
        hdr_path.write_text(header)
        packed.tofile(raw_path)
    except OSError as err:
        raise StackIOError(f"cannot write packed masks: {err}", path=base) from err
    return hdr_path, raw_path


def read_packed_masks(basepath: str | Path) -> tuple[MaskStack, float | None]:
    """Read a packed 1-bit mask volume written by :func:`write_packed_masks`."""
    base = Path(basepath)
    hdr_path = base.with_suffix(".hdr")
    raw_path = base.with_suffix(".raw")
    try:
        fields = {}
        for line in hdr_path.read_text().splitlines():
            key, _, value = line.partition(":")
            fields[key.strip()] = value.strip()
        if fields.get("format") != "packed-bits-v1":
            raise StackIOError(f"unknown format {fields.get('format')!r}", path=hdr_path)
        w = int(fields["width"])
        h = int(fields["height"])
        d = int(fields["depth"])
        voxel = float(fields.get("voxel_size_um", "nan"))
        packed = np.fromfile(raw_path, dtype=np.uint8)
    except OSError as err:
        raise StackIOError(f"cannot read packed masks: {err}", path=base) from err
    bits = np.unpackbits(packed, count=w * h * d).astype(bool)
    volume = bits.reshape(d, h, w)
    masks = MaskStack(masks=[BinaryMask2D(volume[i]) for i in range(d)])
    return masks, (None if math.isnan(voxel) else voxel)
