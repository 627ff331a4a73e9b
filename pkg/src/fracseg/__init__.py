"""fracseg: segmentation toolkit for micro-CT stacks of fractured rock."""

from .amnlm import (
    AmnlmParams,
    ManifoldSet,
    PatchFeatures,
    amnlm_denoise,
    build_patch_features,
    downscale_factor,
    gaussian_kernel,
    low_pass_filter,
    manifold_count,
)
from .chanvese import (
    ChanVeseParams,
    ChanVeseResult,
    LevelSet2D,
    chan_vese,
    chan_vese_tiled,
    cv_energy,
    cv_step,
    init_levelset,
    region_means,
)
from .core import (
    BinaryMask2D,
    Histogram,
    Image2D,
    MaskStack,
    VolumeStack,
    compute_histogram,
    equalize_histogram,
    normalize_intensities,
)
from .morphology import (
    binary_erosion,
    fill_holes,
    remove_small_objects,
    sample_interior_mask,
)
from .pipeline import (
    ConfigError,
    MaskMetrics,
    PipelineConfig,
    compare_masks,
    load_config,
    parse_config,
    porosity,
    run_pipeline,
)
from .ridge import (
    HessianField,
    gaussian_filter,
    hessian_eigenvalues,
    hessian_field,
    sato_multiscale,
    sato_response,
)
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
from .thresholding import (
    LocalThresholdParams,
    fill_exterior,
    local_threshold,
    otsu_binarize,
    otsu_threshold,
)
from .tiling import TileGrid, merge, plan_grid, split

__version__ = "0.1.0"
