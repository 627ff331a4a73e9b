"""Command line for the ML fracture segmenters.

Reads and writes the same TIFF stack conventions as the conventional
pipeline, so its outputs (e.g. Chan-Vese masks) feed directly in as
training labels.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import stackio
from .features import feature_stack
from .tiles import plan_grid


def _parse_scales(text: str) -> list[float]:
    return [float(tok) for tok in text.split(",") if tok.strip()]


def _cmd_rf_train(args) -> int:
    from .rf import rf_train, save_model

    scales = _parse_scales(args.scales)
    slices = stackio.read_stack(args.inp)
    labels = stackio.read_mask_stack(args.labels)
    if len(slices) != len(labels):
        raise ValueError(f"{len(slices)} slices but {len(labels)} label masks")
    features = [feature_stack(s, scales) for s in slices]
    model = rf_train(features, labels, trees=args.trees, seed=args.seed)
    save_model(model, args.out)
    print(f"trained {args.trees}-tree forest on {len(slices)} slices -> {args.out}")
    return 0


def _cmd_rf_predict(args) -> int:
    from .rf import load_model, rf_predict

    scales = _parse_scales(args.scales)
    model = load_model(args.model)
    slices = stackio.read_stack(args.inp)
    masks = [rf_predict(model, feature_stack(s, scales)) for s in slices]
    stackio.write_mask_stack(masks, args.out)
    print(f"predicted {len(masks)} slices -> {args.out}")
    return 0


def _cmd_unet_train(args) -> int:
    from .unet import FULL_SCALE_SPEC, TrainSpec, UnetConfig, save_model, unet_build, unet_train

    tiles = np.stack(stackio.read_stack(args.inp))
    labels = np.stack(stackio.read_mask_stack(args.labels)).astype(np.float32)
    if args.paper_scale:
        spec = FULL_SCALE_SPEC
        cfg = UnetConfig(tile=400)
    else:
        spec = TrainSpec(
            batch_size=args.batch,
            steps_per_epoch=args.steps,
            epochs=args.epochs,
            learning_rate=args.lr,
            val_split=args.val_split,
            seed=args.seed,
        )
        cfg = UnetConfig(tile=tiles.shape[1])
    model = unet_build(cfg)
    model, history = unet_train(model, tiles, labels, spec)
    save_model(model, cfg, spec, args.out)
    losses = history.get("loss", [])
    print(f"trained {len(losses)} epochs; loss {losses[0]:.4f} -> {losses[-1]:.4f}; saved {args.out}")
    return 0


def _cmd_unet_predict(args) -> int:
    from .unet import binarize_probability, load_model, unet_predict, unet_predict_tiles

    model, cfg, _ = load_model(args.model)
    slices = stackio.read_stack(args.inp)
    masks = []
    probs = []
    for data in slices:
        h, w = data.shape
        if h >= args.tile and w >= args.tile:
            grid = plan_grid(w, h, tile=args.tile, overlap=args.overlap, trim=args.trim)
            prob = unet_predict_tiles(model, data, grid)
        else:
            prob = unet_predict(model, data)
        probs.append(prob)
        masks.append(binarize_probability(prob))
    stackio.write_mask_stack(masks, args.out)
    if args.prob_out:
        stackio.write_stack(probs, args.prob_out, dtype="float32")
    print(f"predicted {len(masks)} slices -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mlseg", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rf-train", help="train the random-forest pixel classifier")
    p.add_argument("--in", required=True, dest="inp", help="image stack directory")
    p.add_argument("--labels", required=True, help="mask stack directory (training truth)")
    p.add_argument("--out", required=True, help="output model path (.joblib)")
    p.add_argument("--trees", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scales", default="1,2,4")
    p.set_defaults(func=_cmd_rf_train)

    p = sub.add_parser("rf-predict", help="predict masks with a trained forest")
    p.add_argument("--model", required=True)
    p.add_argument("--in", required=True, dest="inp")
    p.add_argument("--out", required=True)
    p.add_argument("--scales", default="1,2,4")
    p.set_defaults(func=_cmd_rf_predict)

    p = sub.add_parser("unet-train", help="train the U-net on tile stacks")
    p.add_argument("--in", required=True, dest="inp", help="training tile stack")
    p.add_argument("--labels", required=True, help="ground-truth tile stack")
    p.add_argument("--out", required=True, help="output model path (.keras)")
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--batch", type=int, default=5)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--val-split", type=float, default=0.2, dest="val_split")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument(
        "--paper-scale",
        action="store_true",
        dest="paper_scale",
        help="full-scale preset: 400-px tiles, batch 5, 777 steps/epoch, 100 epochs",
    )
    p.set_defaults(func=_cmd_unet_train)

    p = sub.add_parser("unet-predict", help="tiled U-net inference + Otsu binarization")
    p.add_argument("--model", required=True)
    p.add_argument("--in", required=True, dest="inp")
    p.add_argument("--out", required=True, help="binary mask output stack")
    p.add_argument("--prob-out", default=None, dest="prob_out", help="optional probability stack")
    p.add_argument("--tile", type=int, default=400)
    p.add_argument("--overlap", type=int, default=72)
    p.add_argument("--trim", type=int, default=36)
    p.set_defaults(func=_cmd_unet_predict)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except stackio.StackIOError as err:
        print(f"I/O error: {err}", file=sys.stderr)
        return 3
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
