"""Corner and blob detector responses built from the filters module."""

from __future__ import annotations

import numpy as np

from ..autodiff import Tensor, stack
from ..color import check_image
from ..filters import gaussian_blur, gaussian_ksize, spatial_gradient
from .scale_space import ScaleSpace

HARRIS_K = 0.04
# sobel second-derivative taps are 4x the finite-difference derivative
_SOBEL2_SCALE = 1.0 / 16.0
_SOBEL1_SCALE = 1.0 / 8.0


def hessian_response(img: Tensor, sigma: float | None = None) -> Tensor:
    """det of the Hessian, dxx * dyy - dxy^2 (scaled by sigma^4 when given)."""
    check_image(img, 1)
    d = spatial_gradient(img, 2)
    dxx, dxy, dyy = d[:, :, 0], d[:, :, 1], d[:, :, 2]
    det = (dxx * dyy - dxy * dxy) * _SOBEL2_SCALE
    return det * sigma**4 if sigma is not None else det


def harris_response(img: Tensor, sigma: float = 1.0, k: float = HARRIS_K) -> Tensor:
    """det(M) - k trace(M)^2 for the Gaussian-weighted structure tensor M."""
    check_image(img, 1)
    g = spatial_gradient(img, 1) * _SOBEL1_SCALE
    gx, gy = g[:, :, 0], g[:, :, 1]
    ksize = gaussian_ksize(sigma)
    axx = gaussian_blur(gx * gx, ksize, sigma)
    ayy = gaussian_blur(gy * gy, ksize, sigma)
    axy = gaussian_blur(gx * gy, ksize, sigma)
    tr = axx + ayy
    return axx * ayy - axy * axy - tr * tr * k


def dog_response(img: Tensor, sigma: float = 1.6, ratio: float = 2.0 ** (1.0 / 3.0)) -> Tensor:
    """Difference of two Gaussian blurs at ``sigma * ratio`` and ``sigma``."""
    check_image(img, 1)
    s2 = sigma * ratio
    return gaussian_blur(img, gaussian_ksize(s2), s2) - gaussian_blur(img, gaussian_ksize(sigma), sigma)


def detector_response(img: Tensor, kind: str, **kwargs) -> Tensor:
    fns = {"harris": harris_response, "hessian": hessian_response, "dog": dog_response}
    if kind not in fns:
        raise ValueError(f"unknown detector {kind!r}; choose from {sorted(fns)}")
    return fns[kind](img, **kwargs)


def scale_space_responses(space: ScaleSpace, kind: str = "hessian") -> list[Tensor]:
    """Per octave a (N, L, h, w) stack of scale-normalized responses.

    Level ``l`` of the stack corresponds to blur ``sigma0 * 2^(l/s)``; the
    stack has ``s + 2`` levels so every detection level has both neighbours.
    """
    out = []
    s = space.levels_per_octave
    for octave in space.octaves:
        if kind == "dog":
            imgs = octave.images
            levels = [imgs[l + 1] - imgs[l] for l in range(s + 2)]
        elif kind == "hessian":
            levels = [hessian_response(octave.images[l], octave.sigmas[l]) for l in range(s + 2)]
        elif kind == "harris":
            levels = [harris_response(octave.images[l], octave.sigmas[l]) * octave.sigmas[l] ** 4 for l in range(s + 2)]
        else:
            raise ValueError(f"unknown detector {kind!r}")
        out.append(stack([lv[:, 0] for lv in levels], axis=1))
    return out


def local_maxima_3d(resp: np.ndarray, border: int = 1, threshold: float = 0.0) -> np.ndarray:
    """Boolean mask of strict 3x3x3 maxima of (L, h, w) above ``threshold``.

    Only interior levels (1 .. L-2) and pixels at least ``border`` from the
    edge qualify. Plateaus are resolved by keeping the first cell in
    row-major order (ties with a later neighbour do not suppress it).
    """
    L, h, w = resp.shape
    mask = np.zeros(resp.shape, dtype=bool)
    if L < 3 or h <= 2 * border or w <= 2 * border:
        return mask
    b = max(border, 1)
    c = resp[1:-1, b:-b, b:-b]
    ok = c > threshold
    for dl in (-1, 0, 1):
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                if dl == dy == dx == 0:
                    continue
                nb = resp[1 + dl : L - 1 + dl, b + dy : h - b + dy, b + dx : w - b + dx]
                # earlier neighbours (row-major) must be strictly smaller
                earlier = (dl, dy, dx) < (0, 0, 0)
                ok &= (c > nb) if earlier else (c >= nb)
    mask[1:-1, b:-b, b:-b] = ok
    return mask
