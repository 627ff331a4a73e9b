"""Random-forest pixel classifier over the filter-bank features."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import joblib
import numpy as np
from sklearn.ensemble import RandomForestClassifier

from .features import FeatureStack


@dataclass
class RFModel:
    forest: RandomForestClassifier
    feature_names: tuple[str, ...]
    seed: int
    trees: int


def rf_train(features: list[FeatureStack], labels: list[np.ndarray], trees: int = 50, seed: int = 0) -> RFModel:
    """Fit a seeded forest on per-pixel features.

    Deterministic for a fixed seed (single-threaded fit); requires both
    classes to be present in the labels.
    """
    if len(features) != len(labels) or not features:
        raise ValueError("features and labels must be non-empty and aligned")
    names = features[0].names
    xs = []
    ys = []
    for fs, lab in zip(features, labels):
        lab = np.asarray(lab, dtype=bool)
        if fs.names != names:
            raise ValueError("feature ordering differs between slices")
        if fs.data.shape[:2] != lab.shape:
            raise ValueError(f"labels {lab.shape} do not match features {fs.data.shape[:2]}")
        xs.append(fs.matrix())
        ys.append(lab.ravel())
    x = np.concatenate(xs, axis=0)
    y = np.concatenate(ys, axis=0)
    if y.all() or not y.any():
        raise ValueError("labels contain a single class; need both fracture and matrix pixels")
    forest = RandomForestClassifier(n_estimators=trees, random_state=seed, n_jobs=1)
    forest.fit(x, y)
    return RFModel(forest=forest, feature_names=names, seed=seed, trees=trees)


def rf_predict(model: RFModel, features: FeatureStack) -> np.ndarray:
    """Majority-vote fracture mask for one slice."""
    if features.names != model.feature_names:
        raise ValueError(
            f"feature mismatch: model trained on {len(model.feature_names)} features "
            f"{model.feature_names[:3]}..., got {len(features.names)}"
        )
    votes = model.forest.predict(features.matrix())
    return votes.reshape(features.data.shape[:2]).astype(bool)


def save_model(model: RFModel, path: str | Path) -> None:
    """Persist the forest next to a JSON sidecar with its metadata."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    joblib.dump(model.forest, p)
    sidecar = {
        "kind": "random-forest",
        "seed": model.seed,
        "trees": model.trees,
        "feature_names": list(model.feature_names),
    }
    p.with_suffix(p.suffix + ".json").write_text(json.dumps(sidecar, indent=2))


def load_model(path: str | Path) -> RFModel:
    p = Path(path)
    sidecar = json.loads(p.with_suffix(p.suffix + ".json").read_text())
    forest = joblib.load(p)
    return RFModel(
        forest=forest,
        feature_names=tuple(sidecar["feature_names"]),
        seed=int(sidecar["seed"]),
        trees=int(sidecar["trees"]),
    )
