"""Affine image transforms expressed in pixel coordinates."""

from __future__ import annotations

import numpy as np

from ..autodiff import Tensor, cat, inverse, stack
from ..autodiff.tensor import as_tensor
from .warp import homography_warp


def affine_matrix(angle=0.0, translation=(0.0, 0.0), scale=1.0, shear=(0.0, 0.0), center=(0.0, 0.0)) -> Tensor:
    """2x3 pixel-space matrix: shear, scale and rotate about ``center``, then translate.

    ``angle`` is in radians (counter-clockwise in a y-down image is negative).
    All arguments may be tensors, and the result is differentiable w.r.t. them.
    """
    a = as_tensor(angle)
    s = as_tensor(scale)
    tx, ty = (as_tensor(t) for t in translation)
    shx, shy = (as_tensor(t) for t in shear)
    cx, cy = center
    c, sn = a.cos() * s, a.sin() * s
    # rotation-scale times shear [[1, shx], [shy, 1]]
    m00 = c - sn * shy
    m01 = c * shx - sn
    m10 = sn + c * shy
    m11 = sn * shx + c
    m02 = tx + cx - (m00 * cx + m01 * cy)
    m12 = ty + cy - (m10 * cx + m11 * cy)
    return stack([m00, m01, m02, m10, m11, m12]).reshape(2, 3)


def affine_to_normalized_homography(M, height: int, width: int) -> Tensor:
    """Lift a forward pixel-space affine map to the normalized sampling homography.

    The result maps output normalized coordinates to source coordinates, i.e.
    it is N @ inv(A) @ inv(N) with N the pixel-to-normalized map.
    """
    M = as_tensor(M)
    bottom = Tensor(np.broadcast_to(np.array([[0.0, 0.0, 1.0]], dtype=M.dtype), M.shape[:-2] + (1, 3)).copy())
    A = cat([M, bottom], axis=-2)
    N = np.array([[2.0 / width, 0.0, 1.0 / width - 1.0], [0.0, 2.0 / height, 1.0 / height - 1.0], [0.0, 0.0, 1.0]])
    Ninv = np.linalg.inv(N)
    return Tensor(N.astype(M.dtype)) @ inverse(A) @ Tensor(Ninv.astype(M.dtype))


def warp_affine(img: Tensor, M=None, *, angle=0.0, translation=(0.0, 0.0), scale=1.0, shear=(0.0, 0.0), center=None):
    """Move image content by the affine map ``M`` (2x3 or Nx2x3, pixel units).

    Without ``M`` the matrix is built from the keyword parameters; rotation and
    scaling default to the image centre. Returns (warped, validity mask).
    """
    h, w = img.shape[-2:]
    if M is None:
        if center is None:
            center = ((w - 1) / 2.0, (h - 1) / 2.0)
        M = affine_matrix(angle, translation, scale, shear, center)
    H = affine_to_normalized_homography(M, h, w)
    return homography_warp(img, H, (h, w))
