#!/usr/bin/env python3
"""Generate a phantom stack and its training truth via the fracseg CLI.

Writes a synthetic fracture stack, runs `fracseg segment` with a
Chan-Vese configuration to produce the truth masks, and cuts both into
matching training tiles. Only the stack file formats and the CLI of the
conventional pipeline are used.
"""

from __future__ import annotations

import argparse
import subprocess
import sys
from pathlib import Path

import numpy as np
import yaml

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from mlseg import stackio  # noqa: E402
from mlseg.phantoms import make_fracture_tiles  # noqa: E402


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--slices", type=int, default=8)
    parser.add_argument("--size", type=int, default=256, help="slice edge length")
    parser.add_argument("--tile", type=int, default=64, help="training tile edge length")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--max-iter", type=int, default=200, dest="max_iter")
    parser.add_argument("--fracseg", default="fracseg", help="pipeline CLI executable")
    args = parser.parse_args()

    out = Path(args.out)
    raw_dir = out / "raw"
    gt_dir = out / "gt_masks"
    images, _ = make_fracture_tiles(args.slices, args.size, seed=args.seed)
    stackio.write_stack(images, raw_dir, dtype="uint16")

    config = {
        "input": str(raw_dir),
        "output": str(gt_dir),
        "method": "chan-vese",
        "chan_vese": {
            "max_iter": args.max_iter,
            "tile": 0 if args.size < 128 else 128,
            "init": {"window_sigma": 10, "offset": 0.1, "polarity": "dark"},
        },
        "cleanup": {"min_object_size": 4},
    }
    cfg_path = out / "gt_config.yaml"
    cfg_path.write_text(yaml.safe_dump(config))
    result = subprocess.run([args.fracseg, "segment", "--config", str(cfg_path)])
    if result.returncode not in (0, 4):  # 4 = finished with non-convergence warnings
        print(f"pipeline failed with exit code {result.returncode}", file=sys.stderr)
        return result.returncode

    slices = stackio.read_stack(raw_dir)
    masks = stackio.read_mask_stack(gt_dir)
    tiles = []
    truth_tiles = []
    for img, mask in zip(slices, masks):
        for y0 in range(0, args.size - args.tile + 1, args.tile):
            for x0 in range(0, args.size - args.tile + 1, args.tile):
                tiles.append(img[y0 : y0 + args.tile, x0 : x0 + args.tile])
                truth_tiles.append(mask[y0 : y0 + args.tile, x0 : x0 + args.tile])
    stackio.write_stack(tiles, out / "tiles", dtype="uint16")
    stackio.write_mask_stack(truth_tiles, out / "tiles_gt")
    print(f"wrote {len(tiles)} training tiles under {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
