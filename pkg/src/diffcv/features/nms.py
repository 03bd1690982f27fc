"""Soft non-maxima suppression and softargmax localization."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..autodiff import Tensor, cat, softmax, stack
from ..autodiff.tensor import reduce_sum
from .responses import local_maxima_3d
from .scale_space import ScaleSpace, octave_to_level0


def _expected_offset(p: Tensor) -> Tensor:
    """Expected index over the last axis measured from its centre.

    Mirrored positions are paired before weighting, so a symmetric
    distribution gives exactly zero.
    """
    n = p.shape[-1]
    hi = np.arange((n + 1) // 2 if n % 2 else n // 2, n)
    lo = n - 1 - hi
    keep = hi != lo
    hi, lo = hi[keep], lo[keep]
    if len(hi) == 0:
        return reduce_sum(p * 0.0, axis=-1)
    arm = (hi - (n - 1) / 2.0).astype(p.dtype)
    return reduce_sum((p[..., hi] - p[..., lo]) * arm, axis=-1)


def softargmax2d(patch: Tensor, temperature: float = 1.0) -> Tensor:
    """Softmax-weighted expected (x, y) pixel index over the last two axes.

    Returns a (..., 2) tensor; a uniform patch gives its exact centre.
    """
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    *lead, h, w = patch.shape
    p = softmax(patch.reshape(*lead, h * w) / temperature, axis=-1).reshape(*lead, h, w)
    x = _expected_offset(reduce_sum(p, axis=-2)) + (w - 1) / 2.0
    y = _expected_offset(reduce_sum(p, axis=-1)) + (h - 1) / 2.0
    return stack([x, y], axis=-1)


def softargmax1d(values: Tensor, temperature: float = 1.0) -> Tensor:
    """Softmax-weighted expected index over the last axis."""
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    n = values.shape[-1]
    return _expected_offset(softmax(values / temperature, axis=-1)) + (n - 1) / 2.0


@dataclass
class Detections:
    """Selected maxima for one image, level-0 pixel frame.

    ``xy`` (K, 2), ``scale`` (K,) and ``response`` (K,) are differentiable
    through the softargmax refinement; ``octave`` and ``level`` record the
    discrete cell each detection came from.
    """

    xy: Tensor
    scale: Tensor
    response: Tensor
    octave: np.ndarray
    level: np.ndarray
    requested: int
    truncated: bool = field(default=False)

    def __len__(self) -> int:
        return len(self.octave)


def _candidates(responses: list[Tensor], border: int, threshold: float):
    cells, values = [np.zeros((0, 4), dtype=np.int64)], [np.zeros(0)]
    for o, r in enumerate(responses):
        vol = r.data[0]
        lv, y, x = np.nonzero(local_maxima_3d(vol, border, threshold))
        cells.append(np.stack([np.full(lv.shape, o), lv, y, x], axis=1))
        values.append(vol[lv, y, x])
    return np.concatenate(cells).astype(np.int64), np.concatenate(values)


def select_cells(responses: list[Tensor], k: int, border: int = 1, threshold: float = 0.0):
    """Top-k strict 3-D local maxima as (octave, level, y, x) rows plus values.

    Ordered by response descending; ties keep octave, level, then row-major
    order.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    idx, val = _candidates(responses, border, threshold)
    order = np.lexsort((idx[:, 3], idx[:, 2], idx[:, 1], idx[:, 0], -val))
    order = order[:k]
    return idx[order], val[order]


def soft_nms_select(
    responses: list[Tensor],
    space: ScaleSpace,
    k: int,
    window: int = 3,
    temperature: float = 0.1,
    border: int | None = None,
    threshold: float = 0.0,
) -> Detections:
    """Pick the top-k maxima across space and scale and refine them.

    The discrete choice of cells is taken on detached values. Each chosen
    cell is then refined with softargmax over the ``window`` x ``window``
    neighbourhood (and over the three adjacent levels for scale), applied to
    responses divided by the centre response. Coordinates therefore carry
    gradients back to the responses and from there to the image.
    """
    if window % 2 == 0 or window < 3:
        raise ValueError("window must be odd and >= 3")
    r = window // 2
    border = r if border is None else max(border, r)
    if any(resp.shape[0] != 1 for resp in responses):
        raise ValueError("soft_nms_select works on one image at a time")
    cells, _ = select_cells(responses, k, border, threshold)
    dtype = responses[0].dtype
    offs = np.arange(-r, r + 1)
    xy_parts, scale_parts, resp_parts, order = [], [], [], []
    for o, resp in enumerate(responses):
        sel = np.flatnonzero(cells[:, 0] == o)
        if len(sel) == 0:
            continue
        _, lv, y, x = cells[sel].T
        vol = resp[0]  # (L, h, w)
        yy = y[:, None, None] + offs[None, :, None]
        xx = x[:, None, None] + offs[None, None, :]
        win = vol[lv[:, None, None], yy, xx]  # (M, window, window)
        centre = vol[lv, y, x]  # (M,)
        cen = centre.reshape(-1, 1, 1)
        sub = softargmax2d(win / cen, temperature) - float(r)
        scol = vol[lv[:, None] + np.array([-1, 0, 1])[None, :], y[:, None], x[:, None]]  # (M, 3)
        dl = softargmax1d(scol / centre.reshape(-1, 1), temperature) - 1.0
        factor = 2**o
        pos = sub + np.stack([x, y], axis=1).astype(dtype)
        xy_parts.append(octave_to_level0(pos, factor))
        scale_parts.append(((dl + lv.astype(dtype)) * (np.log(2.0) / space.levels_per_octave)).exp() * (space.sigma0 * factor))
        resp_parts.append(centre)
        order.append(sel)
    if not order:
        empty = Tensor(np.zeros((0, 2), dtype=dtype))
        return Detections(empty, Tensor(np.zeros(0, dtype=dtype)), Tensor(np.zeros(0, dtype=dtype)),
                          np.zeros(0, np.int64), np.zeros(0, np.int64), k, True)
    order = np.concatenate(order)
    inv = np.argsort(order)
    xy = cat(xy_parts, axis=0)[inv]
    scale = cat(scale_parts, axis=0)[inv]
    response = cat(resp_parts, axis=0)[inv]
    return Detections(xy, scale, response, cells[:, 0].copy(), cells[:, 1].copy(), k, len(cells) < k)
