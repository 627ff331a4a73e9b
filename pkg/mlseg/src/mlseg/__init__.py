"""mlseg: machine-learning fracture segmenters trained on pipeline masks."""

from .features import FeatureStack, expected_feature_count, feature_stack, membrane_kernels
from .phantoms import fracture_tile, make_fracture_tiles
from .rf import RFModel, rf_predict, rf_train
from .tiles import TileGrid, merge, plan_grid, split

__version__ = "0.1.0"

__all__ = [
    "FeatureStack",
    "RFModel",
    "TileGrid",
    "expected_feature_count",
    "feature_stack",
    "fracture_tile",
    "make_fracture_tiles",
    "membrane_kernels",
    "merge",
    "plan_grid",
    "rf_predict",
    "rf_train",
    "split",
]
