"""Patch extraction, dominant orientation and the SIFT descriptor."""

from __future__ import annotations

import math

import numpy as np

from ..autodiff import Tensor, atan2, cat, clamp, cos, grid_sample, sin, softmax, sqrt, stack, where
from ..autodiff.tensor import ShapeError, as_tensor, reduce_max, reduce_sum
from ..filters import spatial_gradient
from .scale_space import ScaleSpace, level0_to_octave

PATCH_SIZE = 32
PATCH_EXTENT = 12.0  # patch side in units of the keypoint scale
ORI_BINS = 36
SIFT_GRID = 4
SIFT_BINS = 8
SIFT_CLAMP = 0.2
DESCRIPTOR_SIZE = SIFT_GRID * SIFT_GRID * SIFT_BINS


def _check_patches(patches: Tensor, size: int | None = None) -> None:
    if patches.ndim != 4 or patches.shape[1] != 1:
        raise ShapeError(f"patches must be (K, 1, P, P), got {patches.shape}")
    if patches.shape[2] != patches.shape[3]:
        raise ShapeError(f"patches must be square, got {patches.shape[2:]}")
    if size is not None and patches.shape[2] != size:
        raise ShapeError(f"patches must be {size}x{size}, got {patches.shape[2:]}")


def _safe_polar(patches: Tensor):
    """Per-pixel gradient magnitude and angle in [0, 2 pi).

    Pixels with an exactly zero gradient get magnitude 0 and angle 0, with
    no NaNs in either pass.
    """
    g = spatial_gradient(patches, 1)
    gx, gy = g[:, 0, 0], g[:, 0, 1]  # (K, P, P)
    g2 = gx * gx + gy * gy
    nz = g2.data > 0
    mag = where(nz, sqrt(where(nz, g2, 1.0)), 0.0)
    ang = atan2(where(nz, gy, 0.0), where(nz, gx, 1.0))
    ang = where(ang.data < 0, ang + 2.0 * math.pi, ang)
    return mag, ang


def _bin_split(ang: Tensor, nbins: int):
    """Lower bin index and fractional weight toward the next (circular) bin."""
    k = ang.shape[0]
    a = ang.reshape(k, -1) * (nbins / (2.0 * math.pi))
    b0 = np.floor(a.data)
    lo = b0.astype(np.int64) % nbins
    return lo, (lo + 1) % nbins, a - b0


def _soft_bins(ang: Tensor, nbins: int) -> Tensor:
    """Linear soft assignment of angles to ``nbins`` circular bins: (K, nbins, M)."""
    lo, hi, frac = _bin_split(ang, nbins)
    bins = np.arange(nbins)[None, :, None]
    one_lo = (bins == lo[:, None, :]).astype(ang.dtype)
    one_hi = (bins == hi[:, None, :]).astype(ang.dtype)
    f = frac.reshape(frac.shape[0], 1, -1)
    return (1.0 - f) * one_lo + f * one_hi


def _binned_pool(mag: Tensor, ang: Tensor, nbins: int, pool: np.ndarray) -> Tensor:
    """``(soft_bins(ang) * mag) @ pool`` without materializing the one-hot factors twice.

    Same value as the composed form; the backward pass is written out so the
    (K, nbins, M) intermediate is built once per pass.
    """
    lo, hi, frac = _bin_split(ang, nbins)
    k = mag.shape[0]
    m = mag.reshape(k, -1)
    md, fd = m.data, frac.data
    rows = np.arange(k)[:, None]
    cols = np.arange(md.shape[1])[None, :]
    dense = np.zeros((k, nbins, md.shape[1]), dtype=md.dtype)
    dense[rows, lo, cols] += (1.0 - fd) * md
    dense[rows, hi, cols] += fd * md
    out = dense @ pool

    def bw(g):
        gd = g @ pool.T  # (K, nbins, M)
        g_lo = gd[rows, lo, cols]
        g_hi = gd[rows, hi, cols]
        gm = (1.0 - fd) * g_lo + fd * g_hi
        gf = md * (g_hi - g_lo)
        return gm, gf

    return Tensor._make(out, (m, frac), bw)


def _gaussian_window(p: int, sigma: float, dtype) -> np.ndarray:
    c = np.arange(p, dtype=dtype) - (p - 1) / 2.0
    g = np.exp(-(c[:, None] ** 2 + c[None, :] ** 2) / (2.0 * sigma**2))
    return g.reshape(-1)


def dominant_orientation(patches: Tensor, temperature: float = 0.1) -> Tensor:
    """Dominant gradient orientation in [0, 2 pi) for (K, 1, P, P) patches.

    A 36-bin histogram of gradient angles weighted by magnitude and by a
    Gaussian of sigma P/6 around the centre, with linear soft binning. The
    peak is read out by a circular softargmax over the bins (the histogram is
    scaled by its maximum first). Patches without any gradient return 0.
    """
    _check_patches(patches)
    k, _, p, _ = patches.shape
    mag, ang = _safe_polar(patches)
    w = _gaussian_window(p, p / 6.0, patches.dtype)
    hist = _binned_pool(mag, ang, ORI_BINS, w[:, None]).reshape(k, ORI_BINS)
    peak = reduce_max(hist, axis=-1, keepdims=True)
    flat = peak.data[:, 0] <= 0
    norm = hist / where(flat[:, None], 1.0, peak)
    prob = softmax(norm / temperature, axis=-1)
    centres = np.arange(ORI_BINS, dtype=patches.dtype) * (2.0 * math.pi / ORI_BINS)
    s = reduce_sum(prob * np.sin(centres), axis=-1)
    c = reduce_sum(prob * np.cos(centres), axis=-1)
    theta = atan2(s, c)
    theta = where(theta.data < 0, theta + 2.0 * math.pi, theta)
    # guard the 2 pi wrap produced by rounding of tiny negative angles
    theta = where(theta.data >= 2.0 * math.pi, theta - 2.0 * math.pi, theta)
    return where(flat, 0.0, theta)


def _spatial_pooling(p: int, dtype) -> np.ndarray:
    """(P*P, 16) bilinear cell weights times a Gaussian of sigma P/2."""
    cell = p / SIFT_GRID
    coord = np.arange(p, dtype=dtype) + 0.5
    centres = (np.arange(SIFT_GRID, dtype=dtype) + 0.5) * cell
    tri = np.clip(1.0 - np.abs(coord[:, None] - centres[None, :]) / cell, 0.0, None)  # (P, 4)
    spatial = np.einsum("yi,xj->yxij", tri, tri).reshape(p * p, SIFT_GRID * SIFT_GRID)
    return spatial * _gaussian_window(p, p / 2.0, dtype)[:, None]


_POOL_CACHE: dict = {}


def sift_describe(patches: Tensor, clamp_at: float = SIFT_CLAMP) -> Tensor:
    """128-d SIFT descriptors of (K, 1, 32, 32) orientation-normalized patches.

    Gradient magnitudes are split bilinearly over 8 orientation bins and
    over the 4x4 spatial cells with a Gaussian spatial weight, then the
    vector is L2-normalized, clamped at 0.2 and normalized again. Patches
    with no gradient at all map to the uniform vector 1/sqrt(128).
    """
    _check_patches(patches, PATCH_SIZE)
    k, _, p, _ = patches.shape
    key = (p, np.dtype(patches.dtype).str)
    if key not in _POOL_CACHE:
        _POOL_CACHE[key] = _spatial_pooling(p, patches.dtype)
    pool = _POOL_CACHE[key]
    mag, ang = _safe_polar(patches)
    hist = _binned_pool(mag, ang, SIFT_BINS, pool)  # (K, 8, 16)
    hist = hist.permute(0, 2, 1).reshape(k, DESCRIPTOR_SIZE)  # cell-major, then bin

    sq = reduce_sum(hist * hist, axis=-1, keepdims=True)
    empty = sq.data[:, 0] <= 0
    v = hist / sqrt(where(empty[:, None], 1.0, sq))
    v = clamp(v, None, clamp_at)
    sq2 = reduce_sum(v * v, axis=-1, keepdims=True)
    v = v / sqrt(where(empty[:, None], 1.0, sq2))
    return where(empty[:, None], 1.0 / math.sqrt(DESCRIPTOR_SIZE), v)


def patch_grid(xy, scale, orientation, factor: int, height: int, width: int, size: int = PATCH_SIZE) -> Tensor:
    """Normalized sampling grids (K, P, P, 2) for patches on an octave image.

    ``xy`` and ``scale`` are in level-0 pixels; the patch covers
    ``PATCH_EXTENT * scale`` and is rotated by ``orientation``.
    """
    xy = as_tensor(xy)
    scale = as_tensor(scale, dtype=xy.dtype)
    k = xy.shape[0]
    centre = level0_to_octave(xy, factor)  # (K, 2) octave pixels
    side = scale * (PATCH_EXTENT / factor)  # octave pixels
    u = (np.arange(size, dtype=xy.dtype) + 0.5) / size - 0.5  # (P,)
    uu, vv = np.meshgrid(u, u)  # x varies along columns
    if orientation is None:
        dx = side.reshape(k, 1, 1) * uu
        dy = side.reshape(k, 1, 1) * vv
    else:
        orientation = as_tensor(orientation, dtype=xy.dtype)
        c = cos(orientation).reshape(k, 1, 1)
        s = sin(orientation).reshape(k, 1, 1)
        hs = side.reshape(k, 1, 1)
        dx = hs * (c * uu - s * vv)
        dy = hs * (s * uu + c * vv)
    px = dx + centre[:, 0].reshape(k, 1, 1)
    py = dy + centre[:, 1].reshape(k, 1, 1)
    gx = (px * 2.0 + 1.0) / width - 1.0
    gy = (py * 2.0 + 1.0) / height - 1.0
    return stack([gx, gy], axis=-1)


def extract_patches(space: ScaleSpace, xy, scale, octave: np.ndarray, level: np.ndarray, orientation=None,
                    size: int = PATCH_SIZE) -> Tensor:
    """Sample (K, 1, P, P) patches from the gaussian level each keypoint was found on."""
    xy = as_tensor(xy)
    k = xy.shape[0]
    parts, order = [], []
    for o, oc in enumerate(space.octaves):
        for lv in np.unique(level[octave == o]):
            sel = np.flatnonzero((octave == o) & (level == lv))
            img = oc.images[int(lv)]
            h, w = img.shape[-2:]
            ori = None if orientation is None else as_tensor(orientation)[sel]
            grid = patch_grid(xy[sel], as_tensor(scale)[sel], ori, oc.factor, h, w, size)
            parts.append(grid_sample(img, grid))
            order.append(sel)
    if not parts:
        return Tensor(np.zeros((0, 1, size, size), dtype=xy.dtype))
    inv = np.argsort(np.concatenate(order))
    out = cat(parts, axis=0)
    return out[inv] if k > 1 else out
