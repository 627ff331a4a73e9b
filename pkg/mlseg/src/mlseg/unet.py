"""2D U-net segmenter: architecture, training loop, tiled inference.

The encoder halves resolution with 2x2 max pooling while doubling the
convolution depth from 32 up to 512 over four levels; the decoder mirrors
it with 2x2 transposed convolutions and concatenated encoder skips.
Inputs in [0, 1] are zero-centered to [-1, 1] by the model's first layer,
the output is a single sigmoid probability channel, and training uses
binary cross entropy with Adam and brightness augmentation.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

os.environ.setdefault("TF_CPP_MIN_LOG_LEVEL", "2")

from .tiles import TileGrid, merge, split

N_BINS = 256


@dataclass(frozen=True)
class UnetConfig:
    tile: int = 400
    base_depth: int = 32
    max_depth: int = 512
    levels: int = 4
    conv_kernel: int = 3
    pool: int = 2

    def encoder_depths(self) -> list[int]:
        return [min(self.base_depth * 2**i, self.max_depth) for i in range(self.levels)]

    def bottleneck_depth(self) -> int:
        return min(self.base_depth * 2**self.levels, self.max_depth)


@dataclass(frozen=True)
class TrainSpec:
    batch_size: int = 5
    steps_per_epoch: int | None = None  # None -> floor(train_count / batch_size)
    epochs: int = 100
    learning_rate: float = 1e-4
    val_split: float = 0.2
    brightness_low: float = 0.8
    brightness_high: float = 1.2
    shift_low: float = -0.05
    shift_high: float = 0.05
    seed: int = 0


# full-scale production preset (2940-px slices cut into 400-px tiles)
FULL_SCALE_SPEC = TrainSpec(batch_size=5, steps_per_epoch=777, epochs=100, learning_rate=1e-4)


def binary_cross_entropy(truth: np.ndarray, prob: np.ndarray) -> np.ndarray:
    """Per-sample loss -g*log(p) - (1-g)*log(1-p), exact at p == g."""
    g = np.asarray(truth, dtype=np.float64)
    p = np.asarray(prob, dtype=np.float64)
    on = g > 0
    off = g < 1
    loss = np.where(on, -g * np.log(np.where(on, p, 1.0)), 0.0)
    return loss + np.where(off, -(1.0 - g) * np.log1p(np.where(off, -p, 0.0)), 0.0)


def unet_build(cfg: UnetConfig | None = None):
    """Fully convolutional U-net; spatial input shape is left open.

    Any concrete input (including the configured tile) must be divisible
    by pool^levels so encoder and decoder shapes line up.
    """
    if cfg is None:
        cfg = UnetConfig()
    factor = cfg.pool**cfg.levels
    if cfg.tile % factor != 0:
        raise ValueError(f"tile size {cfg.tile} not divisible by {factor}")

    from tensorflow import keras
    from tensorflow.keras import layers

    def conv_block(x, depth):
        x = layers.Conv2D(depth, cfg.conv_kernel, padding="same", activation="relu")(x)
        return layers.Conv2D(depth, cfg.conv_kernel, padding="same", activation="relu")(x)

    inputs = keras.Input(shape=(None, None, 1))
    x = layers.Rescaling(scale=2.0, offset=-1.0)(inputs)
    skips = []
    for depth in cfg.encoder_depths():
        x = conv_block(x, depth)
        skips.append(x)
        x = layers.MaxPooling2D(pool_size=cfg.pool)(x)
    x = conv_block(x, cfg.bottleneck_depth())
    for depth, skip in zip(reversed(cfg.encoder_depths()), reversed(skips)):
        x = layers.Conv2DTranspose(depth, cfg.pool, strides=cfg.pool, padding="same")(x)
        x = layers.Concatenate()([x, skip])
        x = conv_block(x, depth)
    outputs = layers.Conv2D(1, 1, activation="sigmoid")(x)
    return keras.Model(inputs, outputs, name="unet")


def unet_parameter_count(cfg: UnetConfig | None = None) -> int:
    """Layer-by-layer analytic parameter count of :func:`unet_build`."""
    if cfg is None:
        cfg = UnetConfig()
    k2 = cfg.conv_kernel**2
    total = 0
    channels = 1
    for depth in cfg.encoder_depths():
        total += (k2 * channels + 1) * depth + (k2 * depth + 1) * depth
        channels = depth
    bottleneck = cfg.bottleneck_depth()
    total += (k2 * channels + 1) * bottleneck + (k2 * bottleneck + 1) * bottleneck
    channels = bottleneck
    for depth in reversed(cfg.encoder_depths()):
        total += (cfg.pool**2 * channels + 1) * depth  # transposed conv
        merged = depth * 2  # concatenated skip
        total += (k2 * merged + 1) * depth + (k2 * depth + 1) * depth
        channels = depth
    total += channels + 1  # final 1x1 sigmoid conv
    return total


def unet_train(model, tiles, gt_tiles, spec: TrainSpec | None = None):
    """Train on [0, 1] tiles against binary ground truth.

    Splits off a validation fraction, augments brightness on the training
    stream, and returns (model, history) with per-epoch loss curves.
    """
    if spec is None:
        spec = TrainSpec()
    x = np.asarray(tiles, dtype=np.float32)
    y = np.asarray(gt_tiles, dtype=np.float32)
    if x.size == 0:
        raise ValueError("empty training set")
    if x.shape != y.shape or x.ndim != 3:
        raise ValueError(f"tiles {x.shape} and ground truth {y.shape} must be (n, h, w)")
    bad = np.setdiff1d(np.unique(y), [0.0, 1.0])
    if bad.size:
        raise ValueError(f"ground truth must be binary, found values {bad[:5]}")

    import tensorflow as tf

    tf.keras.utils.set_random_seed(spec.seed)
    x = x[..., None]
    y = y[..., None]
    n_val = int(round(len(x) * spec.val_split))
    order = np.random.default_rng(spec.seed).permutation(len(x))
    val_idx, train_idx = order[:n_val], order[n_val:]
    if train_idx.size == 0:
        raise ValueError("empty training set after validation split")
    steps = spec.steps_per_epoch or max(1, len(train_idx) // spec.batch_size)

    def augment(xi, yi):
        factor = tf.random.uniform([], spec.brightness_low, spec.brightness_high)
        shift = tf.random.uniform([], spec.shift_low, spec.shift_high)
        return tf.clip_by_value(xi * factor + shift, 0.0, 1.0), yi

    ds = tf.data.Dataset.from_tensor_slices((x[train_idx], y[train_idx]))
    ds = ds.shuffle(len(train_idx), seed=spec.seed, reshuffle_each_iteration=True)
    ds = ds.repeat().map(augment).batch(spec.batch_size).prefetch(2)

    model.compile(
        optimizer=tf.keras.optimizers.Adam(learning_rate=spec.learning_rate),
        loss="binary_crossentropy",
    )
    history = model.fit(
        ds,
        steps_per_epoch=steps,
        epochs=spec.epochs,
        validation_data=(x[val_idx], y[val_idx]) if n_val else None,
        verbose=0,
    )
    return model, history.history


def unet_predict(model, image: np.ndarray) -> np.ndarray:
    """Whole-image probability map (dims must divide by pool^levels)."""
    arr = np.asarray(image, dtype=np.float32)[None, ..., None]
    return model.predict(arr, verbose=0)[0, ..., 0].astype(np.float64)


def unet_predict_tiles(model, image: np.ndarray, grid: TileGrid) -> np.ndarray:
    """Split, predict per tile, and merge with trimmed ownership."""
    tiles = split(np.asarray(image, dtype=np.float64), grid)
    batch = np.stack(tiles).astype(np.float32)[..., None]
    probs = model.predict(batch, batch_size=4, verbose=0)[..., 0].astype(np.float64)
    return merge([probs[i] for i in range(len(tiles))], grid)


def binarize_probability(prob: np.ndarray) -> np.ndarray:
    """Otsu-binarize a probability map, ignoring exact zeros.

    The threshold is computed over nonzero probabilities only and exact
    zeros always map to background; an all-zero map yields an empty mask.
    """
    p = np.asarray(prob, dtype=np.float64)
    if (p < 0).any() or (p > 1).any():
        raise ValueError("probabilities must lie in [0, 1]")
    nonzero = p[p > 0]
    if nonzero.size == 0:
        return np.zeros(p.shape, dtype=bool)
    bins = np.bincount(np.clip((nonzero * N_BINS).astype(np.int64), 0, N_BINS - 1), minlength=N_BINS)
    if int(np.count_nonzero(bins)) < 2:
        return p > 0  # single occupied level: every nonzero pixel is foreground
    idx = np.arange(N_BINS, dtype=np.float64)
    w0 = np.cumsum(bins.astype(np.float64))[:-1]
    s0 = np.cumsum(bins * idx)[:-1]
    total, s_total = float(bins.sum()), float((bins * idx).sum())
    w1 = total - w0
    s1 = s_total - s0
    valid = (w0 > 0) & (w1 > 0)
    numer = s0 * w1 - s1 * w0
    variance = np.where(valid, numer * numer / np.where(valid, w0 * w1, 1.0), -1.0)
    k = int(np.argmax(variance))
    levels = np.clip((p * N_BINS).astype(np.int64), 0, N_BINS - 1)
    return (levels > k) & (p > 0)


def save_model(model, cfg: UnetConfig, spec: TrainSpec, path: str | Path) -> None:
    """Persist the network next to a JSON sidecar with its metadata."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    model.save(p)
    sidecar = {"kind": "unet", "config": asdict(cfg), "train_spec": asdict(spec)}
    p.with_suffix(p.suffix + ".json").write_text(json.dumps(sidecar, indent=2))


def load_model(path: str | Path):
    import tensorflow as tf

    p = Path(path)
    model = tf.keras.models.load_model(p)
    sidecar = json.loads(p.with_suffix(p.suffix + ".json").read_text())
    cfg = UnetConfig(**sidecar["config"])
    spec = TrainSpec(**sidecar["train_spec"])
    return model, cfg, spec
