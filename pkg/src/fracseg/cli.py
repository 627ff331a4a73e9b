"""Command-line interface for stack denoising, filtering and segmentation.

Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 completed
with non-convergence warnings.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .amnlm import AmnlmParams, amnlm_denoise
from .chanvese import ChanVeseParams, chan_vese, chan_vese_tiled
from .core import (
    BinaryMask2D,
    Image2D,
    MaskStack,
    VolumeStack,
    compute_histogram,
    normalize_intensities,
)
from .morphology import sample_interior_mask
from .pipeline import ConfigError, compare_masks, load_config, porosity, run_pipeline
from .ridge import sato_multiscale
from .stackio import (
    StackIOError,
    read_image,
    read_mask_stack,
    read_stack,
    write_image,
    write_mask_stack,
    write_packed_masks,
    write_stack,
)
from .thresholding import LocalThresholdParams, local_threshold
from . import tiling

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_WARNINGS = 4


def _parse_scales(text: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as err:
        raise ConfigError(f"bad scale list {text!r}: {err}") from err


def _cmd_denoise(args) -> int:
    params = AmnlmParams(
        sigma_s=args.sigma_s, sigma_r=args.sigma_r, sigma_f=args.sigma_f, pca_dims=args.pca_dims
    )
    stack = read_stack(args.inp)
    out = VolumeStack(slices=[amnlm_denoise(s, params) for s in stack], slice_spacing=stack.slice_spacing)
    write_stack(out, args.out, dtype=args.dtype)
    return EXIT_OK


def _cmd_sato(args) -> int:
    scales = _parse_scales(args.scales)
    stack = read_stack(args.inp)
    out = VolumeStack(
        slices=[
            sato_multiscale(s, scales, alpha=args.alpha, bright_ridges=args.bright_ridge) for s in stack
        ],
        slice_spacing=stack.slice_spacing,
    )
    write_stack(out, args.out, dtype=args.dtype)
    return EXIT_OK


def _cmd_lthresh(args) -> int:
    params = LocalThresholdParams(window_sigma=args.window_sigma, offset=args.offset, polarity=args.polarity)
    stack = read_stack(args.inp)
    masks = MaskStack(masks=[local_threshold(s, params) for s in stack])
    write_mask_stack(masks, args.out)
    return EXIT_OK


def _cmd_otsu(args) -> int:
    from .thresholding import otsu_threshold
    from .core import Histogram, N_BINS

    stack = read_stack(args.inp)
    bins = np.zeros(N_BINS, dtype=np.int64)
    total = 0
    for s in stack:
        h = compute_histogram(s)
        bins += h.bins
        total += h.total
    k = otsu_threshold(Histogram(bins=bins, total=total))
    print(f"bin\t{k}")
    print(f"intensity\t{(k + 1) / N_BINS:.6f}")
    return EXIT_OK


def _cmd_chanvese(args) -> int:
    params = ChanVeseParams(
        mu=args.mu,
        nu=args.nu,
        lambda1=args.lambda1,
        lambda2=args.lambda2,
        dt=args.dt,
        epsilon=args.eps,
        tol=args.tol,
        max_iter=args.max_iter,
    )
    stack = read_stack(args.inp)
    init = read_mask_stack(args.init)
    if len(init) != len(stack):
        raise StackIOError(f"init stack has {len(init)} slices, input has {len(stack)}", path=Path(args.init))
    masks = []
    warnings = 0
    for i, (img, seed) in enumerate(zip(stack, init)):
        if args.tile:
            result = chan_vese_tiled(img, seed, params, tile=args.tile)
        else:
            result = chan_vese(img, seed, params)
        if not result.converged:
            warnings += 1
            print(f"warning: slice {i} did not converge within {params.max_iter} iterations", file=sys.stderr)
        masks.append(result.mask)
    write_mask_stack(MaskStack(masks=masks), args.out)
    return EXIT_WARNINGS if warnings else EXIT_OK


def _cmd_interior(args) -> int:
    stack = read_stack(args.inp)
    masks = MaskStack(masks=[sample_interior_mask(s, args.erosion_radius) for s in stack])
    write_mask_stack(masks, args.out)
    return EXIT_OK


def _cmd_tiles(args) -> int:
    if args.action == "split":
        stack = read_stack(args.inp)
        first = stack.slices[0]
        grid = tiling.plan_grid(first.width, first.height, tile=args.tile, overlap=args.overlap, trim=args.trim)
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        for i, img in enumerate(stack):
            slice_dir = out_dir / f"slice_{i:04d}"
            slice_dir.mkdir(exist_ok=True)
            for j, tile_img in enumerate(tiling.split(img, grid)):
                write_image(tile_img, slice_dir / f"tile_{j:04d}.tif", dtype=args.dtype)
        manifest = {
            "width": grid.image_width,
            "height": grid.image_height,
            "tile": grid.tile,
            "overlap": grid.overlap,
            "trim": grid.trim,
            "origins": grid.origins,
            "slices": len(stack),
        }
        (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2))
    else:
        in_dir = Path(args.inp)
        manifest_path = in_dir / "manifest.json"
        if not manifest_path.is_file():
            raise StackIOError("manifest.json not found in tile directory", path=in_dir)
        manifest = json.loads(manifest_path.read_text())
        grid = tiling.TileGrid(
            image_width=manifest["width"],
            image_height=manifest["height"],
            tile=manifest["tile"],
            overlap=manifest["overlap"],
            trim=manifest["trim"],
            origins=[tuple(o) for o in manifest["origins"]],
        )
        slices = []
        for i in range(manifest["slices"]):
            slice_dir = in_dir / f"slice_{i:04d}"
            tiles = [
                read_image(slice_dir / f"tile_{j:04d}.tif", slice_index=i) for j in range(len(grid.origins))
            ]
            slices.append(tiling.merge(tiles, grid))
        write_stack(VolumeStack(slices=slices), args.out, dtype=args.dtype)
    return EXIT_OK


def _cmd_segment(args) -> int:
    cfg = load_config(args.config)
    if args.workers is not None:
        from dataclasses import replace

        cfg = replace(cfg, workers=args.workers)
    masks, report = run_pipeline(cfg)
    if cfg.output_format == "packed":
        write_packed_masks(masks, Path(cfg.output) / "masks", voxel_size=cfg.voxel_size_um)
    else:
        write_mask_stack(masks, cfg.output)

    from .report import render_report_figures, write_report_tables

    report_dir = cfg.report if cfg.report is not None else str(Path(cfg.output) / "report")
    write_report_tables(report, report_dir)
    example = None
    try:
        from .stackio import list_slice_files

        files = list_slice_files(cfg.input)
        example = read_image(files[len(files) // 2], slice_index=len(files) // 2)
    except StackIOError:
        pass
    render_report_figures(report, masks, report_dir, example_image=example)
    print(f"segmented {len(masks)} slices with {cfg.method}; report in {report_dir}")
    return EXIT_WARNINGS if report.warnings else EXIT_OK


def _cmd_porosity(args) -> int:
    masks = read_mask_stack(args.masks)
    interior = read_mask_stack(args.interior)
    try:
        value = porosity(masks, interior)
    except ValueError as err:
        raise ConfigError(str(err)) from err
    print(f"porosity\t{value:.6f}")
    return EXIT_OK


def _cmd_compare(args) -> int:
    a = read_mask_stack(args.a)
    b = read_mask_stack(args.b)
    try:
        metrics = compare_masks(a, b)
    except ValueError as err:
        raise ConfigError(str(err)) from err
    print(f"dice\t{metrics.dice:.6f}")
    print(f"iou\t{metrics.iou:.6f}")
    print(f"true_positive\t{metrics.true_positive}")
    print(f"false_positive\t{metrics.false_positive}")
    print(f"false_negative\t{metrics.false_negative}")
    print(f"true_negative\t{metrics.true_negative}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fracseg", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("denoise", help="adaptive-manifolds non-local-means denoising")
    p.add_argument("--sigma-s", type=float, default=8.0, dest="sigma_s")
    p.add_argument("--sigma-r", type=float, default=0.2, dest="sigma_r")
    p.add_argument("--sigma-f", type=float, default=1.0, dest="sigma_f")
    p.add_argument("--pca-dims", type=int, default=3, dest="pca_dims")
    p.add_argument("--in", required=True, dest="inp", help="input stack directory")
    p.add_argument("--out", required=True, help="output stack directory")
    p.add_argument("--dtype", default="float32", choices=("uint8", "uint16", "float32"))
    p.set_defaults(func=_cmd_denoise)

    p = sub.add_parser("sato", help="multi-scale ridge response maps")
    p.add_argument("--scales", default="1,1.5,2,3")
    p.add_argument("--alpha", type=float, default=0.25)
    p.add_argument("--bright-ridge", action="store_true", dest="bright_ridge")
    p.add_argument("--in", required=True, dest="inp")
    p.add_argument("--out", required=True)
    p.add_argument("--dtype", default="float32", choices=("uint8", "uint16", "float32"))
    p.set_defaults(func=_cmd_sato)

    p = sub.add_parser("lthresh", help="local adaptive thresholding")
    p.add_argument("--window-sigma", type=float, default=15.0, dest="window_sigma")
    p.add_argument("--offset", type=float, default=0.05)
    p.add_argument("--polarity", default="dark", choices=("dark", "bright"))
    p.add_argument("--in", required=True, dest="inp")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_lthresh)

    p = sub.add_parser("otsu", help="print the Otsu threshold of a stack")
    p.add_argument("--in", required=True, dest="inp")
    p.set_defaults(func=_cmd_otsu)

    p = sub.add_parser("chanvese", help="level-set refinement of an initial mask stack")
    p.add_argument("--mu", type=float, default=0.2)
    p.add_argument("--nu", type=float, default=0.0)
    p.add_argument("--lambda1", type=float, default=1.0)
    p.add_argument("--lambda2", type=float, default=1.0)
    p.add_argument("--dt", type=float, default=0.45)
    p.add_argument("--eps", type=float, default=1.0)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--max-iter", type=int, default=500, dest="max_iter")
    p.add_argument("--tile", type=int, default=400, help="crop size; 0 disables tiling")
    p.add_argument("--init", required=True, help="initial mask stack directory")
    p.add_argument("--in", required=True, dest="inp")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_chanvese)

    p = sub.add_parser("interior", help="sample-interior masks (Otsu + fill + erode)")
    p.add_argument("--erosion-radius", type=int, default=3, dest="erosion_radius")
    p.add_argument("--in", required=True, dest="inp")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_interior)

    p = sub.add_parser("tiles", help="overlap-tile split/merge of a stack")
    p.add_argument("action", choices=("split", "merge"))
    p.add_argument("--tile", type=int, default=400)
    p.add_argument("--overlap", type=int, default=72)
    p.add_argument("--trim", type=int, default=36)
    p.add_argument("--in", required=True, dest="inp")
    p.add_argument("--out", required=True)
    p.add_argument("--dtype", default="float32", choices=("uint8", "uint16", "float32"))
    p.set_defaults(func=_cmd_tiles)

    p = sub.add_parser("segment", help="run the full config-driven pipeline")
    p.add_argument("--config", required=True)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=_cmd_segment)

    p = sub.add_parser("porosity", help="fracture fraction within the interior")
    p.add_argument("--masks", required=True)
    p.add_argument("--interior", required=True)
    p.set_defaults(func=_cmd_porosity)

    p = sub.add_parser("compare", help="Dice/IoU/confusion between two mask stacks")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.set_defaults(func=_cmd_compare)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except StackIOError as err:
        print(f"I/O error: {err}", file=sys.stderr)
        return EXIT_IO
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
