"""Detect-and-describe pipeline returning differentiable local features."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ..autodiff import Tensor
from ..color import check_image, rgb_to_grayscale
from .nms import soft_nms_select
from .responses import scale_space_responses
from .scale_space import build_scale_space
from .sift import dominant_orientation, extract_patches, sift_describe


class LocalFeature(NamedTuple):
    x: float
    y: float
    scale: float
    orientation: float
    response: float


@dataclass
class LocalFeatures:
    """Features of one image. Tensors keep the graph back to the pixels."""

    xy: Tensor  # (K, 2) level-0 pixels
    scale: Tensor  # (K,)
    orientation: Tensor  # (K,) radians in [0, 2 pi)
    response: Tensor  # (K,)
    desc: Tensor | None = None  # (K, 128)
    truncated: bool = False

    def __len__(self) -> int:
        return self.xy.shape[0]

    def __getitem__(self, i: int) -> LocalFeature:
        return LocalFeature(
            float(self.xy.data[i, 0]), float(self.xy.data[i, 1]), float(self.scale.data[i]),
            float(self.orientation.data[i]), float(self.response.data[i]),
        )

    def to_list(self) -> list[LocalFeature]:
        return [self[i] for i in range(len(self))]


@dataclass
class DetectorConfig:
    kind: str = "hessian"
    levels_per_octave: int = 3
    sigma0: float = 1.6
    min_size: int = 32
    window: int = 3
    temperature: float = 0.1
    upright: bool = False
    border: int = 2


def detect_and_describe(img: Tensor, k: int, config: DetectorConfig | None = None) -> LocalFeatures:
    """Scale-space detection, soft NMS, orientation and SIFT for one image."""
    check_image(img)
    if img.shape[0] != 1:
        raise ValueError("detect_and_describe expects a single image (N = 1)")
    cfg = config or DetectorConfig()
    gray = rgb_to_grayscale(img) if img.shape[1] == 3 else img
    space = build_scale_space(gray, cfg.levels_per_octave, cfg.sigma0, cfg.min_size)
    responses = scale_space_responses(space, cfg.kind)
    det = soft_nms_select(responses, space, k, cfg.window, cfg.temperature, cfg.border)
    if len(det) == 0:
        z = Tensor(np.zeros(0, dtype=img.dtype))
        return LocalFeatures(det.xy, det.scale, z, det.response, Tensor(np.zeros((0, 128), dtype=img.dtype)), True)
    if cfg.upright:
        ori = Tensor(np.zeros(len(det), dtype=img.dtype))
        patches = extract_patches(space, det.xy, det.scale, det.octave, det.level)
    else:
        upright = extract_patches(space, det.xy, det.scale, det.octave, det.level)
        ori = dominant_orientation(upright)
        patches = extract_patches(space, det.xy, det.scale, det.octave, det.level, ori)
    desc = sift_describe(patches)
    return LocalFeatures(det.xy, det.scale, ori, det.response, desc, det.truncated)

