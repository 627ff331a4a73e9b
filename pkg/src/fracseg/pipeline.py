"""Config-driven full-stack segmentation plus porosity and mask metrics.

A run is described by a YAML file naming the input stack, exactly one
segmentation method with its parameter block, and optional denoise,
rim-fill and cleanup stages. Slices are independent, so they can be
processed by a worker pool; results are written into position-addressed
slots, which keeps the output bit-identical for any worker count. Every
resolved parameter is echoed into the run report so defaults stay
auditable.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .amnlm import AmnlmParams, amnlm_denoise
from .chanvese import ChanVeseParams, chan_vese, chan_vese_tiled
from .core import BinaryMask2D, Image2D, MaskStack
from .morphology import binary_erosion, remove_small_objects, sample_interior_mask
from .ridge import sato_multiscale
from .stackio import StackIOError, list_slice_files, read_image, read_mask
from .thresholding import LocalThresholdParams, fill_exterior, local_threshold

METHODS = ("local-threshold", "sato", "chan-vese", "external-mask")


class ConfigError(Exception):
    """Invalid or inconsistent pipeline configuration."""


@dataclass(frozen=True)
class NormalizeSettings:
    low_pct: float = 0.01
    high_pct: float = 0.99


@dataclass(frozen=True)
class ExteriorFillSettings:
    erosion_radius: int = 3
    value: float | None = None
    reference: tuple[int, int, int, int] | None = None  # row0, col0, row1, col1


@dataclass(frozen=True)
class SatoSettings:
    scales: tuple[float, ...] = (1.0, 1.5, 2.0, 3.0)
    alpha: float = 0.25
    bright_ridges: bool = False
    threshold: LocalThresholdParams = field(
        default_factory=lambda: LocalThresholdParams(window_sigma=15.0, offset=-0.02, polarity="bright")
    )


@dataclass(frozen=True)
class ChanVeseSettings:
    params: ChanVeseParams = field(default_factory=ChanVeseParams)
    tile: int = 400  # 0 disables tiled evolution
    init: LocalThresholdParams | str = field(default_factory=LocalThresholdParams)


@dataclass(frozen=True)
class CleanupSettings:
    min_object_size: int = 0
    connectivity: int = 8
    erosion_radius: int = 0


@dataclass(frozen=True)
class PipelineConfig:
    input: str
    output: str
    method: str
    report: str | None = None
    workers: int = 1
    voxel_size_um: float | None = None
    output_format: str = "tiff"  # tiff | packed
    normalize: NormalizeSettings | None = None
    denoise: AmnlmParams | None = None
    exterior_fill: ExteriorFillSettings | None = None
    local_threshold: LocalThresholdParams | None = None
    sato: SatoSettings | None = None
    chan_vese: ChanVeseSettings | None = None
    external_mask: str | None = None
    cleanup: CleanupSettings | None = None


@dataclass
class SliceRecord:
    index: int
    source: str
    seconds: float
    mask_pixels: int
    mask_fraction: float
    converged: bool | None = None


@dataclass
class RunReport:
    method: str
    parameters: dict[str, Any]
    slices: list[SliceRecord] = field(default_factory=list)
    warnings: int = 0
    total_seconds: float = 0.0


@dataclass(frozen=True)
class MaskMetrics:
    """Overlap metrics between two mask stacks.

    ``porosity`` is the foreground fraction of the first stack over all
    voxels; dice and iou are symmetric.
    """

    porosity: float
    dice: float
    iou: float
    true_positive: int
    false_positive: int
    true_negative: int
    false_negative: int


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ConfigError(message)


def _known_keys(block: dict, allowed: set[str], where: str) -> None:
    unknown = set(block) - allowed
    _require(not unknown, f"unknown keys in {where}: {sorted(unknown)}")


def _parse_local_threshold(block: dict, where: str) -> LocalThresholdParams:
    _known_keys(block, {"window_sigma", "offset", "polarity"}, where)
    try:
        return LocalThresholdParams(
            window_sigma=float(block.get("window_sigma", 15.0)),
            offset=float(block.get("offset", 0.05)),
            polarity=str(block.get("polarity", "dark")),
        )
    except ValueError as err:
        raise ConfigError(f"{where}: {err}") from err


def parse_config(raw: dict) -> PipelineConfig:
    """Validate a raw mapping (parsed YAML) into a PipelineConfig."""
    _require(isinstance(raw, dict), "config root must be a mapping")
    allowed = {
        "input", "output", "report", "method", "workers", "voxel_size_um", "output_format",
        "normalize", "denoise", "exterior_fill", "local_threshold", "sato", "chan_vese",
        "external_mask", "cleanup",
    }
    _known_keys(raw, allowed, "config")
    for key in ("input", "output", "method"):
        _require(key in raw, f"config must set '{key}'")
    method = str(raw["method"])
    _require(method in METHODS, f"method must be one of {METHODS}, got {method!r}")
    _require(Path(raw["input"]).is_dir(), f"input stack not found: {raw['input']}")

    workers = int(raw.get("workers", 1))
    _require(workers >= 1, "workers must be >= 1")
    output_format = str(raw.get("output_format", "tiff"))
    _require(output_format in ("tiff", "packed"), "output_format must be 'tiff' or 'packed'")

    normalize = None
    if raw.get("normalize") is not None:
        block = raw["normalize"]
        _known_keys(block, {"low_pct", "high_pct"}, "normalize")
        normalize = NormalizeSettings(
            low_pct=float(block.get("low_pct", 0.01)), high_pct=float(block.get("high_pct", 0.99))
        )
        _require(0.0 <= normalize.low_pct < normalize.high_pct <= 1.0, "normalize percentiles out of order")

    denoise = None
    if raw.get("denoise") is not None:
        block = raw["denoise"]
        _known_keys(block, {"sigma_s", "sigma_r", "sigma_f", "pca_dims", "feedback_lowpass"}, "denoise")
        try:
            denoise = AmnlmParams(
                sigma_s=float(block.get("sigma_s", 8.0)),
                sigma_r=float(block.get("sigma_r", 0.2)),
                sigma_f=float(block.get("sigma_f", 1.0)),
                pca_dims=int(block.get("pca_dims", 3)),
                feedback_lowpass=bool(block.get("feedback_lowpass", False)),
            )
        except ValueError as err:
            raise ConfigError(f"denoise: {err}") from err

    exterior = None
    if raw.get("exterior_fill") is not None:
        block = raw["exterior_fill"]
        _known_keys(block, {"erosion_radius", "value", "reference"}, "exterior_fill")
        value = block.get("value")
        reference = block.get("reference")
        _require(
            (value is None) != (reference is None),
            "exterior_fill needs exactly one of 'value' or 'reference'",
        )
        if reference is not None:
            _require(
                isinstance(reference, (list, tuple)) and len(reference) == 4,
                "exterior_fill.reference must be [row0, col0, row1, col1]",
            )
            reference = tuple(int(v) for v in reference)
        exterior = ExteriorFillSettings(
            erosion_radius=int(block.get("erosion_radius", 3)),
            value=None if value is None else float(value),
            reference=reference,
        )

    lt = sato = cv = external = None
    if method == "local-threshold":
        lt = _parse_local_threshold(raw.get("local_threshold") or {}, "local_threshold")
    elif method == "sato":
        block = raw.get("sato") or {}
        _known_keys(block, {"scales", "alpha", "bright_ridges", "threshold"}, "sato")
        scales = tuple(float(s) for s in block.get("scales", (1.0, 1.5, 2.0, 3.0)))
        _require(len(scales) > 0, "sato.scales must not be empty")
        threshold = _parse_local_threshold(
            {"polarity": "bright", "offset": -0.02, **(block.get("threshold") or {})}, "sato.threshold"
        )
        _require(threshold.polarity == "bright", "sato.threshold.polarity must be 'bright'")
        sato = SatoSettings(
            scales=scales,
            alpha=float(block.get("alpha", 0.25)),
            bright_ridges=bool(block.get("bright_ridges", False)),
            threshold=threshold,
        )
    elif method == "chan-vese":
        block = raw.get("chan_vese") or {}
        _known_keys(
            block,
            {"mu", "nu", "lambda1", "lambda2", "dt", "epsilon", "tol", "max_iter", "clamp", "tile", "init"},
            "chan_vese",
        )
        try:
            params = ChanVeseParams(
                mu=float(block.get("mu", 0.2)),
                nu=float(block.get("nu", 0.0)),
                lambda1=float(block.get("lambda1", 1.0)),
                lambda2=float(block.get("lambda2", 1.0)),
                dt=float(block.get("dt", 0.45)),
                epsilon=float(block.get("epsilon", 1.0)),
                tol=float(block.get("tol", 1e-4)),
                max_iter=int(block.get("max_iter", 500)),
                clamp=float(block.get("clamp", 8.0)),
            )
        except ValueError as err:
            raise ConfigError(f"chan_vese: {err}") from err
        init_block = block.get("init")
        if isinstance(init_block, str):
            _require(Path(init_block).is_dir(), f"chan_vese.init stack not found: {init_block}")
            init: LocalThresholdParams | str = init_block
        else:
            init = _parse_local_threshold(init_block or {}, "chan_vese.init")
        tile = int(block.get("tile", 400))
        _require(tile == 0 or tile >= 64, "chan_vese.tile must be 0 (disabled) or >= 64")
        cv = ChanVeseSettings(params=params, tile=tile, init=init)
    else:  # external-mask
        block = raw.get("external_mask") or {}
        _known_keys(block, {"path"}, "external_mask")
        _require("path" in block, "external_mask needs 'path'")
        _require(Path(block["path"]).is_dir(), f"external mask stack not found: {block['path']}")
        external = str(block["path"])

    cleanup = None
    if raw.get("cleanup") is not None:
        block = raw["cleanup"]
        _known_keys(block, {"min_object_size", "connectivity", "erosion_radius"}, "cleanup")
        cleanup = CleanupSettings(
            min_object_size=int(block.get("min_object_size", 0)),
            connectivity=int(block.get("connectivity", 8)),
            erosion_radius=int(block.get("erosion_radius", 0)),
        )
        _require(cleanup.connectivity in (4, 8), "cleanup.connectivity must be 4 or 8")

    return PipelineConfig(
        input=str(raw["input"]),
        output=str(raw["output"]),
        report=None if raw.get("report") is None else str(raw["report"]),
        method=method,
        workers=workers,
        voxel_size_um=None if raw.get("voxel_size_um") is None else float(raw["voxel_size_um"]),
        output_format=output_format,
        normalize=normalize,
        denoise=denoise,
        exterior_fill=exterior,
        local_threshold=lt,
        sato=sato,
        chan_vese=cv,
        external_mask=external,
        cleanup=cleanup,
    )


def load_config(path: str | Path) -> PipelineConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    try:
        raw = yaml.safe_load(p.read_text())
    except yaml.YAMLError as err:
        raise ConfigError(f"cannot parse config: {err}") from err
    return parse_config(raw)


def resolved_parameters(cfg: PipelineConfig) -> dict[str, Any]:
    """Flat, auditable key/value view of every resolved parameter."""
    out: dict[str, Any] = {"method": cfg.method, "workers": cfg.workers, "output_format": cfg.output_format}
    for name in ("normalize", "denoise", "exterior_fill", "local_threshold", "sato", "chan_vese", "cleanup"):
        block = getattr(cfg, name)
        if block is None:
            continue
        if isinstance(block, ChanVeseSettings):
            entries = {**asdict(block.params), "tile": block.tile}
            entries["init"] = block.init if isinstance(block.init, str) else asdict(block.init)
        else:
            entries = asdict(block)
        for key, value in entries.items():
            out[f"{name}.{key}"] = value
    if cfg.external_mask is not None:
        out["external_mask.path"] = cfg.external_mask
    if cfg.voxel_size_um is not None:
        out["voxel_size_um"] = cfg.voxel_size_um
    return out


def _segment_slice(cfg: PipelineConfig, img: Image2D, external_path: str | None):
    """Apply the configured stages to one loaded slice."""
    from .core import normalize_intensities

    converged: bool | None = None
    if cfg.normalize is not None:
        img = normalize_intensities(img, cfg.normalize.low_pct, cfg.normalize.high_pct)
    if cfg.denoise is not None:
        img = amnlm_denoise(img, cfg.denoise)
    if cfg.exterior_fill is not None:
        interior = sample_interior_mask(img, cfg.exterior_fill.erosion_radius)
        if cfg.exterior_fill.value is not None:
            img = fill_exterior(img, interior, fill=cfg.exterior_fill.value)
        else:
            r0, c0, r1, c1 = cfg.exterior_fill.reference
            ref = np.zeros(img.shape, dtype=bool)
            ref[r0:r1, c0:c1] = True
            img = fill_exterior(img, interior, fill="auto", reference=BinaryMask2D(ref))

    if cfg.method == "local-threshold":
        mask = local_threshold(img, cfg.local_threshold)
    elif cfg.method == "sato":
        response = sato_multiscale(
            img, cfg.sato.scales, alpha=cfg.sato.alpha, bright_ridges=cfg.sato.bright_ridges
        )
        mask = local_threshold(response, cfg.sato.threshold)
    elif cfg.method == "chan-vese":
        settings = cfg.chan_vese
        if isinstance(settings.init, str):
            init = read_mask(external_path)
        else:
            init = local_threshold(img, settings.init)
        if settings.tile:
            result = chan_vese_tiled(img, init, settings.params, tile=settings.tile)
        else:
            result = chan_vese(img, init, settings.params)
        mask = result.mask
        converged = result.converged
    else:  # external-mask
        mask = read_mask(external_path)

    if cfg.cleanup is not None:
        if cfg.cleanup.min_object_size > 1:
            mask = remove_small_objects(mask, cfg.cleanup.min_object_size, cfg.cleanup.connectivity)
        if cfg.cleanup.erosion_radius >= 1:
            mask = binary_erosion(mask, cfg.cleanup.erosion_radius)
    return mask, converged


def _slice_worker(args) -> tuple[int, np.ndarray, float, bool | None, str]:
    cfg, index, path, external_path = args
    start = time.perf_counter()
    img = read_image(path, slice_index=index)
    mask, converged = _segment_slice(cfg, img, external_path)
    return index, mask.data, time.perf_counter() - start, converged, Path(path).name


def run_pipeline(cfg: PipelineConfig) -> tuple[MaskStack, RunReport]:
    """Segment every slice of the configured stack.

    Deterministic for a fixed config regardless of worker count: slices
    are pure functions of their input file and results land in
    position-addressed slots.
    """
    started = time.perf_counter()
    files = list_slice_files(cfg.input)

    external_files: list[Path | None] = [None] * len(files)
    external_dir = None
    if cfg.method == "external-mask":
        external_dir = cfg.external_mask
    elif cfg.method == "chan-vese" and isinstance(cfg.chan_vese.init, str):
        external_dir = cfg.chan_vese.init
    if external_dir is not None:
        ext = list_slice_files(external_dir)
        if len(ext) != len(files):
            raise StackIOError(
                f"mask stack has {len(ext)} slices but input has {len(files)}", path=Path(external_dir)
            )
        external_files = list(ext)

    jobs = [(cfg, i, str(f), None if e is None else str(e)) for i, (f, e) in enumerate(zip(files, external_files))]
    results: list[tuple[np.ndarray, float, bool | None, str] | None] = [None] * len(files)
    if cfg.workers == 1:
        for job in jobs:
            index, mask, seconds, converged, name = _slice_worker(job)
            results[index] = (mask, seconds, converged, name)
    else:
        max_workers = min(cfg.workers, os.cpu_count() or cfg.workers)
        with ProcessPoolExecutor(max_workers=max_workers) as pool:
            for index, mask, seconds, converged, name in pool.map(_slice_worker, jobs):
                results[index] = (mask, seconds, converged, name)

    report = RunReport(method=cfg.method, parameters=resolved_parameters(cfg))
    masks = []
    for i, packed in enumerate(results):
        mask, seconds, converged, name = packed
        masks.append(BinaryMask2D(mask))
        pixels = int(mask.sum())
        report.slices.append(
            SliceRecord(
                index=i,
                source=name,
                seconds=seconds,
                mask_pixels=pixels,
                mask_fraction=pixels / mask.size,
                converged=converged,
            )
        )
        if converged is False:
            report.warnings += 1
    report.total_seconds = time.perf_counter() - started
    return MaskStack(masks=masks), report


def porosity(masks: MaskStack, interior: MaskStack) -> float:
    """Fracture voxels inside the interior divided by interior voxels."""
    if len(masks) != len(interior) or (
        len(masks) and masks.masks[0].shape != interior.masks[0].shape
    ):
        raise ValueError("mask and interior stacks must have identical shapes")
    interior_voxels = 0
    fracture_voxels = 0
    for mask, inner in zip(masks, interior):
        interior_voxels += int(inner.data.sum())
        fracture_voxels += int((mask.data & inner.data).sum())
    if interior_voxels == 0:
        raise ValueError("interior mask is empty")
    return fracture_voxels / interior_voxels


def compare_masks(a: MaskStack, b: MaskStack) -> MaskMetrics:
    """Dice, IoU and confusion counts between two stacks of equal shape."""
    if len(a) != len(b) or (len(a) and a.masks[0].shape != b.masks[0].shape):
        raise ValueError("mask stacks must have identical shapes")
    tp = fp = tn = fn = 0
    for ma, mb in zip(a, b):
        da, db = ma.data, mb.data
        tp += int((da & db).sum())
        fp += int((da & ~db).sum())
        fn += int((~da & db).sum())
        tn += int((~da & ~db).sum())
    total = tp + fp + tn + fn
    dice = 2 * tp / (2 * tp + fp + fn) if (2 * tp + fp + fn) > 0 else 1.0
    iou = tp / (tp + fp + fn) if (tp + fp + fn) > 0 else 1.0
    return MaskMetrics(
        porosity=(tp + fp) / total if total else 0.0,
        dice=dice,
        iou=iou,
        true_positive=tp,
        false_positive=fp,
        true_negative=tn,
        false_negative=fn,
    )
