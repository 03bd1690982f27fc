"""Losses for the registration, depth and attack solvers.

All losses are means (not sums) so magnitudes are comparable across pyramid
levels and image sizes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .autodiff import Tensor, clamp, exp, sqrt
from .autodiff.tensor import ShapeError, as_tensor, reduce_sum
from .features.matching import mine_hard_negatives, pair_by_reprojection
from .filters import gaussian_blur
from .geometry.warp import transform_points_homography

SSIM_SIGMA = 1.5


@dataclass
class DepthLossWeights:
    alpha: float = 0.85
    lam: float = 0.1

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")


@dataclass
class AttackLossWeights:
    alpha: float = 1.0
    beta: float = 10.0

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("attack loss weights must be non-negative")


def _mask_tensor(mask, like: Tensor) -> tuple[Tensor, float]:
    m = np.broadcast_to(np.asarray(mask, dtype=like.dtype), like.shape)
    count = float(m.sum())
    if count == 0:
        raise ValueError("validity mask is empty: the images do not overlap")
    return Tensor(np.ascontiguousarray(m)), count


def masked_mean(x: Tensor, mask=None) -> Tensor:
    if mask is None:
        return x.mean()
    m, count = _mask_tensor(mask, x)
    return reduce_sum(x * m) / count


def l1_photometric(a: Tensor, b: Tensor, mask=None) -> Tensor:
    """Mean absolute difference over the valid pixels (mask broadcasts over channels)."""
    if a.shape != b.shape:
        raise ShapeError(f"shapes differ: {a.shape} vs {b.shape}")
    return masked_mean((a - b).abs(), mask)


def ssim_map(a: Tensor, b: Tensor, window: int = 5, data_range: float = 1.0) -> Tensor:
    """Per-pixel SSIM with a Gaussian window (sigma 1.5, replicate borders)."""
    if a.shape != b.shape:
        raise ShapeError(f"shapes differ: {a.shape} vs {b.shape}")
    if window % 2 == 0 or window < 1:
        raise ValueError("window must be a positive odd integer")
    if window > min(a.shape[-2:]):
        raise ShapeError(f"window {window} larger than image {a.shape[-2:]}")
    c1 = (0.01 * data_range) ** 2
    c2 = (0.03 * data_range) ** 2

    def smooth(x):
        return gaussian_blur(x, window, SSIM_SIGMA)

    mu_a, mu_b = smooth(a), smooth(b)
    mu_a2, mu_b2, mu_ab = mu_a * mu_a, mu_b * mu_b, mu_a * mu_b
    var_a = smooth(a * a) - mu_a2
    var_b = smooth(b * b) - mu_b2
    cov = smooth(a * b) - mu_ab
    num = (mu_ab * 2.0 + c1) * (cov * 2.0 + c2)
    den = (mu_a2 + mu_b2 + c1) * (var_a + var_b + c2)
    return num / den


def ssim_loss(a: Tensor, b: Tensor, window: int = 5, mask=None) -> Tensor:
    """Mean of (1 - SSIM) / 2, in [0, 1]."""
    return masked_mean((1.0 - ssim_map(a, b, window)) * 0.5, mask)


def smoothness_loss(depth: Tensor, guide: Tensor) -> Tensor:
    """Edge-aware first-order smoothness with forward differences.

    ``mean(|d_x D| exp(-|d_x I|)) + mean(|d_y D| exp(-|d_y I|))`` where the image
    gradient magnitude is the mean absolute difference over channels.
    """
    if depth.shape[-2:] != guide.shape[-2:]:
        raise ShapeError(f"depth {depth.shape} and guide {guide.shape} differ spatially")
    ddx = depth[..., :, 1:] - depth[..., :, :-1]
    ddy = depth[..., 1:, :] - depth[..., :-1, :]
    gdx = (guide[..., :, 1:] - guide[..., :, :-1]).abs().mean(axis=1, keepdims=True)
    gdy = (guide[..., 1:, :] - guide[..., :-1, :]).abs().mean(axis=1, keepdims=True)
    return (ddx.abs() * exp(-gdx)).mean() + (ddy.abs() * exp(-gdy)).mean()


def depth_total_loss(
    ref: Tensor,
    warped: Sequence[Tensor],
    masks: Sequence[np.ndarray],
    depth: Tensor,
    weights: DepthLossWeights,
    window: int = 5,
) -> Tensor:
    """alpha * SSIM term + (1 - alpha) * L1 term + lambda * smoothness, views averaged."""
    if not warped:
        raise ValueError("need at least one warped view")
    n = len(warped)
    photo_ssim = photo_l1 = None
    for w, m in zip(warped, masks):
        s = ssim_loss(ref, w, window, m)
        l1 = l1_photometric(ref, w, m)
        photo_ssim = s if photo_ssim is None else photo_ssim + s
        photo_l1 = l1 if photo_l1 is None else photo_l1 + l1
    total = photo_l1 / n if weights.alpha == 0 else photo_ssim / n * weights.alpha + photo_l1 / n * (1.0 - weights.alpha)
    if weights.lam:
        total = total + smoothness_loss(depth, ref) * weights.lam
    return total


# -- attack ----------------------------------------------------------------------


def descriptor_distance(d1: Tensor, d2: Tensor, eps: float = 1e-12) -> Tensor:
    """Row-wise L2 distance between (K, D) descriptor sets."""
    diff = d1 - d2
    return sqrt(reduce_sum(diff * diff, axis=-1) + eps)


def triplet_margin(d_anchor: Tensor, d_pos: Tensor, d_neg: Tensor, margin: float = 1.0, hinge: bool = True) -> Tensor:
    """mean(margin + d(a, p) - d(a, n)), clamped at zero per triplet when ``hinge``."""
    t = descriptor_distance(d_anchor, d_pos) - descriptor_distance(d_anchor, d_neg) + margin
    if hinge:
        t = clamp(t, 0.0, None)
    return t.mean()


def localization_loss(p1: Tensor, p2_in_a: Tensor, height: int, width: int) -> Tensor:
    """Mean squared distance between paired keypoints in normalized units."""
    scale = np.array([2.0 / width, 2.0 / height], dtype=p1.dtype)
    r = (p1 - p2_in_a) * scale
    return reduce_sum(r * r, axis=-1).mean()


def regularization_loss(imgs: Sequence[Tensor], imgs_init: Sequence) -> Tensor:
    """Mean squared deviation from the unmodified images, averaged over images."""
    total = None
    for img, init in zip(imgs, imgs_init):
        d = img - as_tensor(init.data if isinstance(init, Tensor) else init, dtype=img.dtype)
        term = (d * d).mean()
        total = term if total is None else total + term
    return total / len(imgs)


def attack_losses(
    feats_a,
    feats_b,
    H_target,
    imgs: Sequence[Tensor],
    imgs_init: Sequence,
    weights: AttackLossWeights,
    pair_radius: float = 8.0,
    hinge: bool = True,
):
    """Total, localization, descriptor and regularization terms of the attack.

    ``feats_*`` expose ``xy`` (K, 2) pixel tensors and ``desc`` (K, 128).
    ``H_target`` (3x3, pixels) maps image-b coordinates into image a. Each
    a-keypoint is paired with the b-keypoint whose reprojection is closest,
    if within ``pair_radius`` pixels; its hard negative is the nearest
    descriptor among b-keypoints reprojecting farther than 3x the radius.
    """
    H = as_tensor(H_target, dtype=feats_a.xy.dtype)
    pb_in_a = transform_points_homography(H, feats_b.xy)
    ia, ib, reproj = pair_by_reprojection(feats_a.xy.data, pb_in_a.data, pair_radius)
    if len(ia) == 0:
        raise ValueError(
            f"no keypoint pairs within {pair_radius} px after reprojection "
            f"({len(feats_a.xy)} keypoints in a, {len(feats_b.xy)} in b)"
        )
    h, w = imgs[0].shape[-2:]
    l_loc = localization_loss(feats_a.xy[ia], pb_in_a[ib], h, w)

    neg, keep = mine_hard_negatives(feats_a.desc.data[ia], feats_b.desc.data, reproj[ia], 3.0 * pair_radius)
    if keep.any():
        sel = np.flatnonzero(keep)
        l_desc = triplet_margin(feats_a.desc[ia[sel]], feats_b.desc[ib[sel]], feats_b.desc[neg[sel]], hinge=hinge)
    else:
        l_desc = Tensor(np.zeros((), dtype=l_loc.dtype))
    l_reg = regularization_loss(imgs, imgs_init)
    total = l_loc + l_desc * weights.alpha + l_reg * weights.beta
    return total, l_loc, l_desc, l_reg
