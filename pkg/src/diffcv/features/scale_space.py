"""Gaussian scale space with octave structure."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..autodiff import Tensor
from ..color import check_image
from ..filters import gaussian_blur, gaussian_ksize

ASSUMED_INPUT_SIGMA = 0.5


def half_resolution(img: Tensor) -> Tensor:
    """Halve the resolution by bilinear sampling at the centre of every 2x2 block.

    With the pixel-centre convention this equals the 2x2 block mean. An odd
    trailing row or column is dropped, which keeps the centre mapping
    ``x_fine = 2 x_coarse + 0.5`` exact.
    """
    n, c, h, w = img.shape
    h2, w2 = h // 2, w // 2
    crop = img[:, :, : 2 * h2, : 2 * w2]
    return crop.reshape(n, c, h2, 2, w2, 2).mean(axis=(3, 5))


@dataclass
class Octave:
    images: list[Tensor]  # gaussian levels, each (N, 1, h, w)
    sigmas: list[float]  # blur of each level in this octave's pixels
    factor: int  # pixel size relative to level 0 (2 ** octave)


@dataclass
class ScaleSpace:
    octaves: list[Octave] = field(default_factory=list)
    levels_per_octave: int = 3
    sigma0: float = 1.6

    @property
    def levels(self) -> list[tuple[Tensor, float, int]]:
        """Flat list of (image, sigma in level-0 pixels, downscale factor)."""
        return [(img, s * o.factor, o.factor) for o in self.octaves for img, s in zip(o.images, o.sigmas)]

    def level_sigma(self, level: float) -> float:
        """Blur (octave pixels) of a possibly fractional level index."""
        return self.sigma0 * 2.0 ** (level / self.levels_per_octave)


def _blur_to(img: Tensor, sigma: float) -> Tensor:
    return gaussian_blur(img, gaussian_ksize(sigma), sigma)


def build_scale_space(
    img: Tensor,
    levels_per_octave: int = 3,
    sigma0: float = 1.6,
    min_size: int = 32,
    max_octaves: int | None = None,
    input_sigma: float = ASSUMED_INPUT_SIGMA,
) -> ScaleSpace:
    """Per octave: ``levels_per_octave + 3`` gaussian levels with sigma0 * 2^(k/s).

    The next octave starts from the level with twice the base blur, halved in
    resolution. Octaves are added while the shorter side stays >= ``min_size``.
    """
    check_image(img, 1)
    if levels_per_octave < 1:
        raise ValueError("need at least one level per octave")
    s = levels_per_octave
    sigmas = [sigma0 * 2.0 ** (k / s) for k in range(s + 3)]
    space = ScaleSpace(levels_per_octave=s, sigma0=sigma0)
    base = _blur_to(img, math.sqrt(max(sigma0**2 - input_sigma**2, 0.01)))
    factor = 1
    while min(base.shape[-2:]) >= min_size:
        images = [base]
        for k in range(1, s + 3):
            inc = math.sqrt(sigmas[k] ** 2 - sigmas[k - 1] ** 2)
            images.append(_blur_to(images[-1], inc))
        space.octaves.append(Octave(images, sigmas, factor))
        if max_octaves is not None and len(space.octaves) >= max_octaves:
            break
        base = half_resolution(images[s])
        factor *= 2
    if not space.octaves:
        raise ValueError(f"image {img.shape[-2:]} smaller than the minimum octave size {min_size}")
    return space


def octave_to_level0(xy: np.ndarray | Tensor, factor: int):
    """Map pixel coordinates of an octave with ``factor`` back to level 0."""
    return (xy + 0.5) * float(factor) - 0.5


def level0_to_octave(xy, factor: int):
    return (xy + 0.5) / float(factor) - 0.5
