"""Document layout detection evaluation and confidence estimation."""

from ._docdet import (
    DocdetError,
    RegressionForest,
    __version__,
    cer,
    dap,
    dov,
    edit_distance,
    evaluate,
    extract_objects,
    map_over_thresholds,
    mask_iou,
    object_features,
    pce,
    rasterize_polygon,
    rejection_curve,
    run,
    select_images,
    wer,
)

__all__ = [
    "DocdetError",
    "RegressionForest",
    "__version__",
    "cer",
    "dap",
    "dov",
    "edit_distance",
    "evaluate",
    "extract_objects",
    "map_over_thresholds",
    "mask_iou",
    "object_features",
    "pce",
    "rasterize_polygon",
    "rejection_curve",
    "run",
    "select_images",
    "wer",
]
