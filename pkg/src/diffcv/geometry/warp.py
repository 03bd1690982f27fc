"""Inverse warping of images by a homography or by depth and camera poses."""

from __future__ import annotations

import numpy as np

from ..autodiff import Tensor, grid_sample, stack, where
from ..autodiff.functional import grid_inside, pixel_centers
from ..autodiff.tensor import as_tensor
from .camera import Z_EPS, PinholeCamera
from .conversions import W_EPS, normalize_pixel_coordinates
from .linalg import relative_transformation


def _batch_matrix(m: Tensor, n: int) -> Tensor:
    if m.ndim == 2:
        m = m.reshape((1,) + m.shape)
    if m.shape[0] not in (1, n):
        raise ValueError(f"matrix batch {m.shape[0]} does not match image batch {n}")
    return m


def _entry(m: Tensor, i: int, j: int) -> Tensor:
    return m[:, i : i + 1, j : j + 1]


def transform_grid(H, gx, gy):
    """Apply (N, 3, 3) to normalized coordinate arrays; returns (x, y, valid)."""
    h = [[_entry(H, i, j) for j in range(3)] for i in range(3)]
    x = h[0][0] * gx + h[0][1] * gy + h[0][2]
    y = h[1][0] * gx + h[1][1] * gy + h[1][2]
    w = h[2][0] * gx + h[2][1] * gy + h[2][2]
    ok = np.abs(w.data) > W_EPS
    ws = where(ok, w, 1.0)
    return x / ws, y / ws, ok


def homography_warp(img: Tensor, H, out_size: tuple[int, int] | None = None):
    """Sample ``img`` at ``H`` applied to each output pixel's normalized coordinate.

    ``H`` is (3, 3) or (N, 3, 3) and maps destination coordinates to source
    coordinates. Returns the warped (N, C, h, w) image and a boolean validity
    mask (N, 1, h, w) that is true where the sample fell inside the source.
    """
    H = as_tensor(H, dtype=img.dtype)
    n = img.shape[0]
    H = _batch_matrix(H, n)
    if np.any(np.abs(np.linalg.det(H.data)) < 1e-12):
        raise ValueError("homography is singular")
    h, w = out_size or img.shape[-2:]
    gx, gy = pixel_centers(h, w, img.dtype)
    x, y, ok = transform_grid(H, gx[None], gy[None])
    nb = max(n, H.shape[0])
    grid = stack([x, y], axis=-1)
    if grid.shape[0] != nb:
        grid = grid.expand((nb, h, w, 2))
    mask = grid_inside(grid) & ok[:, None]
    return grid_sample(img, grid), mask


def transform_points_homography(H, pts) -> Tensor:
    """Apply (..., 3, 3) to points (..., M, 2) with perspective division."""
    H, pts = as_tensor(H), as_tensor(pts)
    x, y = pts[..., 0], pts[..., 1]
    hx = H[..., 0:1, 0] * x + H[..., 0:1, 1] * y + H[..., 0:1, 2]
    hy = H[..., 1:2, 0] * x + H[..., 1:2, 1] * y + H[..., 1:2, 2]
    hw = H[..., 2:3, 0] * x + H[..., 2:3, 1] * y + H[..., 2:3, 2]
    hw = where(np.abs(hw.data) > W_EPS, hw, 1.0)
    return stack([hx / hw, hy / hw], axis=-1)


def depth_warp(src: Tensor, cam_src: PinholeCamera, cam_ref: PinholeCamera, depth: Tensor):
    """Warp ``src`` into the reference view given the reference depth map.

    Each reference pixel is back-projected with its depth, moved into the
    source camera frame and projected with the source intrinsics; ``src`` is
    then read bilinearly there. Returns (N, C, H, W) and a validity mask that
    excludes points behind the source camera or outside its image.
    """
    depth = as_tensor(depth, dtype=src.dtype)
    n, _, h, w = depth.shape
    rel = _batch_matrix(relative_transformation(cam_ref.T, cam_src.T), n)
    Kr = _batch_matrix(as_tensor(cam_ref.K, dtype=src.dtype), n)
    Ks = _batch_matrix(as_tensor(cam_src.K, dtype=src.dtype), n)

    u = np.arange(w, dtype=src.dtype)[None, None, :]
    v = np.arange(h, dtype=src.dtype)[None, :, None]
    d = depth[:, 0]
    xr = (u - _entry(Kr, 0, 2)) / _entry(Kr, 0, 0) * d
    yr = (v - _entry(Kr, 1, 2)) / _entry(Kr, 1, 1) * d
    r = [[_entry(rel, i, j) for j in range(4)] for i in range(3)]
    xs = r[0][0] * xr + r[0][1] * yr + r[0][2] * d + r[0][3]
    ys = r[1][0] * xr + r[1][1] * yr + r[1][2] * d + r[1][3]
    zs = r[2][0] * xr + r[2][1] * yr + r[2][2] * d + r[2][3]
    front = zs.data > Z_EPS
    zsafe = where(front, zs, 1.0)
    us = xs / zsafe * _entry(Ks, 0, 0) + _entry(Ks, 0, 2)
    vs = ys / zsafe * _entry(Ks, 1, 1) + _entry(Ks, 1, 2)
    hs, ws = src.shape[-2:]
    grid = normalize_pixel_coordinates(stack([us, vs], axis=-1), hs, ws)
    if grid.shape[0] != n:
        grid = grid.expand((n, h, w, 2))
    mask = grid_inside(grid) & front[:, None]
    return grid_sample(src, grid), mask
