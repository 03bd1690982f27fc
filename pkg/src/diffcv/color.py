"""Differentiable color-space conversions and photometric adjustments.

Images are (N, C, H, W) tensors. Hue is expressed in radians in [0, 2*pi).
Grayscale uses ITU-R BT.601 luma weights and YCbCr is full range.
"""

from __future__ import annotations

import math
from enum import Enum

import numpy as np

from .autodiff import Tensor, cat, clamp, maximum, minimum, where
from .autodiff.tensor import ShapeError, reduce_max, reduce_min

GRAY_WEIGHTS = (0.299, 0.587, 0.114)


class ColorSpace(str, Enum):
    RGB = "rgb"
    BGR = "bgr"
    GRAY = "gray"
    HSV = "hsv"
    YCBCR = "ycbcr"

    @property
    def channels(self) -> int:
        return 1 if self is ColorSpace.GRAY else 3


def check_image(img: Tensor, channels: int | None = None, name: str = "image") -> None:
    if img.ndim != 4:
        raise ShapeError(f"{name} must be (N, C, H, W), got shape {img.shape}")
    if channels is not None and img.shape[1] != channels:
        raise ShapeError(f"{name} must have {channels} channels, got {img.shape[1]}")


def _split(img: Tensor) -> tuple[Tensor, Tensor, Tensor]:
    return img[:, 0:1], img[:, 1:2], img[:, 2:3]


def rgb_to_bgr(img: Tensor) -> Tensor:
    check_image(img, 3)
    r, g, b = _split(img)
    return cat([b, g, r], axis=1)


bgr_to_rgb = rgb_to_bgr


def rgb_to_grayscale(img: Tensor) -> Tensor:
    check_image(img, 3)
    r, g, b = _split(img)
    wr, wg, wb = GRAY_WEIGHTS
    return r * wr + g * wg + b * wb


def grayscale_to_rgb(img: Tensor) -> Tensor:
    check_image(img, 1)
    return cat([img, img, img], axis=1)


def rgb_to_hsv(img: Tensor, eps: float = 1e-12) -> Tensor:
    """RGB in [0, 1] to (hue [rad], saturation, value).

    Where two channels tie for the maximum the first one (R, then G, then B)
    selects the hue branch.
    """
    check_image(img, 3)
    r, g, b = _split(img)
    v = reduce_max(img, axis=1, keepdims=True)
    delta = v - reduce_min(img, axis=1, keepdims=True)
    chroma = delta.data > eps
    safe_delta = where(chroma, delta, 1.0)
    s = where(v.data > eps, delta / where(v.data > eps, v, 1.0), 0.0)

    argmax = np.argmax(img.data, axis=1)[:, None]
    h_r = (g - b) / safe_delta
    h_r = where(h_r.data < 0, h_r + 6.0, h_r)
    h_g = (b - r) / safe_delta + 2.0
    h_b = (r - g) / safe_delta + 4.0
    h = where(argmax == 0, h_r, where(argmax == 1, h_g, h_b))
    h = where(chroma, h * (math.pi / 3.0), 0.0)
    h = where(h.data >= 2 * math.pi, h - 2 * math.pi, h)
    return cat([h, s, v], axis=1)


def hsv_to_rgb(img: Tensor) -> Tensor:
    """Inverse of :func:`rgb_to_hsv`; any real hue is wrapped modulo 2*pi."""
    check_image(img, 3)
    h, s, v = _split(img)
    h6 = h * (3.0 / math.pi)
    channels = []
    for n in (5.0, 3.0, 1.0):
        k = h6 + n
        k = k - 6.0 * np.floor(k.data / 6.0)
        ramp = clamp(minimum(k, 4.0 - k), 0.0, 1.0)
        channels.append(v - v * s * ramp)
    return cat(channels, axis=1)


# full-range YCbCr: Cb/Cr are scaled chroma differences offset by 0.5
_CB_SCALE = 2.0 * (1.0 - GRAY_WEIGHTS[2])
_CR_SCALE = 2.0 * (1.0 - GRAY_WEIGHTS[0])


def rgb_to_ycbcr(img: Tensor) -> Tensor:
    check_image(img, 3)
    r, g, b = _split(img)
    y = rgb_to_grayscale(img)
    cb = (b - y) / _CB_SCALE + 0.5
    cr = (r - y) / _CR_SCALE + 0.5
    return cat([y, cb, cr], axis=1)


def ycbcr_to_rgb(img: Tensor) -> Tensor:
    check_image(img, 3)
    y, cb, cr = _split(img)
    r = y + (cr - 0.5) * _CR_SCALE
    b = y + (cb - 0.5) * _CB_SCALE
    wr, wg, wb = GRAY_WEIGHTS
    g = (y - r * wr - b * wb) / wg
    return cat([r, g, b], axis=1)


_TO_RGB = {
    ColorSpace.RGB: lambda x: x,
    ColorSpace.BGR: bgr_to_rgb,
    ColorSpace.GRAY: grayscale_to_rgb,
    ColorSpace.HSV: hsv_to_rgb,
    ColorSpace.YCBCR: ycbcr_to_rgb,
}
_FROM_RGB = {
    ColorSpace.RGB: lambda x: x,
    ColorSpace.BGR: rgb_to_bgr,
    ColorSpace.GRAY: rgb_to_grayscale,
    ColorSpace.HSV: rgb_to_hsv,
    ColorSpace.YCBCR: rgb_to_ycbcr,
}


def convert(img: Tensor, src, dst) -> Tensor:
    """Convert between any two color spaces, pivoting through RGB."""
    src, dst = ColorSpace(src), ColorSpace(dst)
    check_image(img, src.channels)
    if src is dst:
        return img
    return _FROM_RGB[dst](_TO_RGB[src](img))


def adjust_brightness(img: Tensor, amount: float) -> Tensor:
    check_image(img, 3)
    return clamp(img + amount, 0.0, 1.0)


def adjust_contrast(img: Tensor, amount: float) -> Tensor:
    check_image(img, 3)
    return clamp(img * amount, 0.0, 1.0)


def adjust_saturation(img: Tensor, amount: float) -> Tensor:
    hsv = rgb_to_hsv(img)
    h, s, v = _split(hsv)
    return hsv_to_rgb(cat([h, clamp(s * amount, 0.0, 1.0), v], axis=1))


def adjust_hue(img: Tensor, amount: float) -> Tensor:
    """Rotate hue by ``amount`` radians."""
    hsv = rgb_to_hsv(img)
    h, s, v = _split(hsv)
    return hsv_to_rgb(cat([h + amount, s, v], axis=1))


def adjust(img: Tensor, what: str, amount: float) -> Tensor:
    fns = {
        "brightness": adjust_brightness,
        "contrast": adjust_contrast,
        "saturation": adjust_saturation,
        "hue": adjust_hue,
    }
    if what not in fns:
        raise ValueError(f"unknown adjustment {what!r}")
    return fns[what](img, amount)
