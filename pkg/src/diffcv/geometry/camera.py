"""Pinhole camera: zero-skew intrinsics plus a world-to-camera pose."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..autodiff import Tensor, stack, where
from ..autodiff.tensor import as_tensor
from .linalg import check_rigid, inverse_transformation, transform_points

Z_EPS = 1e-8


def intrinsics(fx, fy, cx, cy, dtype=np.float64) -> np.ndarray:
    return np.array([[fx, 0.0, cx], [0.0, fy, cy], [0.0, 0.0, 1.0]], dtype=dtype)


def _kparts(K: Tensor):
    return K[..., 0:1, 0:1], K[..., 1:2, 1:2], K[..., 0:1, 2:3], K[..., 1:2, 2:3]


def project_points(K, pts, return_mask: bool = False):
    """Camera-frame points (..., M, 3) to pixels (..., M, 2).

    Points with z <= 1e-8 are masked invalid and divided by 1.
    """
    K, pts = as_tensor(K), as_tensor(pts)
    fx, fy, cx, cy = (k[..., 0] for k in _kparts(K))
    z = pts[..., 2]
    ok = z.data > Z_EPS
    zs = where(ok, z, 1.0)
    u = pts[..., 0] / zs * fx + cx
    v = pts[..., 1] / zs * fy + cy
    pix = stack([u, v], axis=-1)
    return (pix, ok) if return_mask else pix


def unproject_points(K, pix, depth) -> Tensor:
    """Pixels (..., M, 2) with depth (..., M) to camera-frame points (..., M, 3)."""
    K, pix, depth = as_tensor(K), as_tensor(pix), as_tensor(depth)
    fx, fy, cx, cy = (k[..., 0] for k in _kparts(K))
    x = (pix[..., 0] - cx) / fx
    y = (pix[..., 1] - cy) / fy
    return stack([x * depth, y * depth, depth], axis=-1)


@dataclass
class PinholeCamera:
    """``K`` is (3, 3) or (N, 3, 3); ``T`` maps world points into this camera's frame."""

    K: Tensor
    T: Tensor
    height: int
    width: int

    def __post_init__(self):
        self.K = as_tensor(self.K)
        self.T = as_tensor(self.T)
        k = self.K.data
        if np.any(k[..., 0, 0] <= 0) or np.any(k[..., 1, 1] <= 0):
            raise ValueError("focal lengths must be positive")
        check_rigid(self.T)

    @property
    def fx(self):
        return self.K[..., 0, 0]

    @property
    def fy(self):
        return self.K[..., 1, 1]

    @property
    def cx(self):
        return self.K[..., 0, 2]

    @property
    def cy(self):
        return self.K[..., 1, 2]

    def project(self, pts_world, return_mask: bool = False):
        cam = transform_points(self.T, pts_world)
        return project_points(self.K, cam, return_mask)

    def unproject(self, pix, depth) -> Tensor:
        cam = unproject_points(self.K, pix, depth)
        return transform_points(inverse_transformation(self.T), cam)

    def scaled(self, factor: float) -> "PinholeCamera":
        """Camera for an image resized by ``factor`` on the pixel-centre grid."""
        s = np.array([[factor, 0.0, 0.5 * factor - 0.5], [0.0, factor, 0.5 * factor - 0.5], [0.0, 0.0, 1.0]])
        K = as_tensor(s.astype(self.K.dtype)) @ self.K
        h = max(1, int(round(self.height * factor)))
        w = max(1, int(round(self.width * factor)))
        return PinholeCamera(K, self.T, h, w)


def camera_project(cam: PinholeCamera, pts_world):
    return cam.project(pts_world)


def camera_unproject(cam: PinholeCamera, pix, depth):
    return cam.unproject(pix, depth)


def stack_cameras(cams) -> PinholeCamera:
    """Batch several single-view cameras of equal size."""
    K = stack([as_tensor(c.K) for c in cams])
    T = stack([as_tensor(c.T) for c in cams])
    return PinholeCamera(K, T, cams[0].height, cams[0].width)


__all__ = ["PinholeCamera", "intrinsics", "project_points", "unproject_points", "camera_project", "camera_unproject", "stack_cameras"]
