"""Differentiable local features: scale space, detectors, soft NMS, SIFT and matching."""

from .matching import consistent_matches, match_descriptors, mine_hard_negatives, pair_by_reprojection, pairwise_l2
from .nms import Detections, select_cells, soft_nms_select, softargmax1d, softargmax2d
from .pipeline import DetectorConfig, LocalFeature, LocalFeatures, detect_and_describe
from .ransac import dlt_homography, ransac_homography, reprojection_error
from .responses import (
    HARRIS_K,
    detector_response,
    dog_response,
    harris_response,
    hessian_response,
    local_maxima_3d,
    scale_space_responses,
)
from .scale_space import Octave, ScaleSpace, build_scale_space, half_resolution
from .sift import (
    DESCRIPTOR_SIZE,
    PATCH_SIZE,
    dominant_orientation,
    extract_patches,
    patch_grid,
    sift_describe,
)

__all__ = [
    "DESCRIPTOR_SIZE",
    "Detections",
    "DetectorConfig",
    "HARRIS_K",
    "LocalFeature",
    "LocalFeatures",
    "Octave",
    "PATCH_SIZE",
    "ScaleSpace",
    "build_scale_space",
    "consistent_matches",
    "detect_and_describe",
    "detector_response",
    "dlt_homography",
    "dog_response",
    "dominant_orientation",
    "extract_patches",
    "half_resolution",
    "harris_response",
    "hessian_response",
    "local_maxima_3d",
    "match_descriptors",
    "mine_hard_negatives",
    "pair_by_reprojection",
    "pairwise_l2",
    "patch_grid",
    "ransac_homography",
    "reprojection_error",
    "scale_space_responses",
    "select_cells",
    "sift_describe",
    "soft_nms_select",
    "softargmax1d",
    "softargmax2d",
]
