"""Image-shaped kernels: padding, 2-D correlation and bilinear grid sampling."""

from __future__ import annotations

import numpy as np

from .parallel import map_batch
from .tensor import ShapeError, Tensor, as_tensor

PADDING_MODES = ("zeros", "replicate", "reflect")


def _source_index(n: int, before: int, after: int, mode: str) -> np.ndarray:
    """Map each padded position to its source index (-1 for zero padding)."""
    pos = np.arange(-before, n + after)
    if mode == "zeros":
        return np.where((pos >= 0) & (pos < n), pos, -1)
    if mode == "replicate":
        return np.clip(pos, 0, n - 1)
    if mode == "reflect":
        if n == 1:
            return np.zeros_like(pos)
        period = 2 * (n - 1)
        p = np.mod(pos, period)
        return np.where(p < n, p, period - p)
    raise ValueError(f"unknown padding mode {mode!r}; expected one of {PADDING_MODES}")


def pad(x: Tensor, pads: tuple[int, int, int, int], mode: str = "replicate") -> Tensor:
    """Pad the last two axes by ``(top, bottom, left, right)``."""
    top, bottom, left, right = pads
    if mode == "reflect" and (max(top, bottom) >= x.shape[-2] or max(left, right) >= x.shape[-1]) and min(x.shape[-2:]) > 1:
        raise ShapeError("reflect padding must be smaller than the padded extent")
    H, W = x.shape[-2:]
    rows = _source_index(H, top, bottom, mode)
    cols = _source_index(W, left, right, mode)
    width = [(0, 0)] * (x.ndim - 2) + [(top, bottom), (left, right)]
    np_mode = {"zeros": "constant", "replicate": "edge", "reflect": "reflect"}[mode]
    out = np.pad(x.data, width, mode=np_mode)

    def bw(g):
        gr = g[..., top : top + H, :].copy()
        for r in list(range(top)) + list(range(top + H, top + H + bottom)):
            if rows[r] >= 0:
                gr[..., rows[r], :] += g[..., r, :]
        gc = gr[..., :, left : left + W].copy()
        for c in list(range(left)) + list(range(left + W, left + W + right)):
            if cols[c] >= 0:
                gc[..., :, cols[c]] += gr[..., :, c]
        return (gc,)

    return Tensor._make(out, (x,), bw)


def _correlate_valid(xp: np.ndarray, w: np.ndarray) -> np.ndarray:
    N, _, Hp, Wp = xp.shape
    Co, Ci, kh, kw = w.shape
    H, W = Hp - kh + 1, Wp - kw + 1
    out = np.zeros((N, Co, H, W), dtype=np.result_type(xp, w))
    single = Co == 1 and Ci == 1
    for i in range(kh):
        for j in range(kw):
            win = xp[:, :, i : i + H, j : j + W]
            if single:
                c = w[0, 0, i, j]
                if c != 0:
                    out += c * win
            else:
                out += np.einsum("oc,nchw->nohw", w[:, :, i, j], win)
    return out


def conv2d(x: Tensor, kernel, padding: str = "replicate") -> Tensor:
    """Same-size 2-D cross-correlation.

    ``x`` is (N, C_in, H, W) and ``kernel`` is (C_out, C_in, kh, kw) with odd
    kh and kw. The output keeps the spatial extents; borders follow
    ``padding`` (one of ``zeros``, ``replicate``, ``reflect``).
    """
    kernel = as_tensor(kernel, dtype=x.dtype)
    if x.ndim != 4 or kernel.ndim != 4:
        raise ShapeError(f"conv2d expects 4-d input and kernel, got {x.shape} and {kernel.shape}")
    Co, Ci, kh, kw = kernel.shape
    if kh % 2 == 0 or kw % 2 == 0:
        raise ValueError(f"kernel extents must be odd, got {kh}x{kw}")
    if Ci != x.shape[1]:
        raise ShapeError(f"kernel expects {Ci} input channels, input has {x.shape[1]}")
    xp = pad(x, (kh // 2, kh // 2, kw // 2, kw // 2), padding) if (kh > 1 or kw > 1) else x
    return _correlate(xp, kernel)


def _correlate(xp: Tensor, kernel: Tensor) -> Tensor:
    xd, wd = xp.data, kernel.data
    N, Ci, Hp, Wp = xd.shape
    Co, _, kh, kw = wd.shape
    H, W = Hp - kh + 1, Wp - kw + 1
    out = map_batch(lambda a: _correlate_valid(a, wd), xd)

    def bw(g):
        gx = gw = None
        single = Co == 1 and Ci == 1
        if xp.requires_grad:
            gx = np.zeros(xd.shape, dtype=g.dtype)
            for i in range(kh):
                for j in range(kw):
                    if single:
                        c = wd[0, 0, i, j]
                        if c != 0:
                            gx[:, :, i : i + H, j : j + W] += c * g
                    else:
                        gx[:, :, i : i + H, j : j + W] += np.einsum("oc,nohw->nchw", wd[:, :, i, j], g)
        if kernel.requires_grad:
            gw = np.zeros(wd.shape, dtype=g.dtype)
            for i in range(kh):
                for j in range(kw):
                    win = xd[:, :, i : i + H, j : j + W]
                    gw[:, :, i, j] = np.einsum("nohw,nchw->oc", g, win)
        return gx, gw

    return Tensor._make(out, (xp, kernel), bw)


def _snap_tol(dtype) -> float:
    return 1e-9 if np.dtype(dtype) == np.float64 else 1e-4


def grid_sample(inp: Tensor, grid: Tensor) -> Tensor:
    """Bilinear sampling of ``inp`` (N or 1, C, H, W) at ``grid`` (N, H', W', 2).

    Grid entries are (x, y) in normalized coordinates where -1 and 1 are the
    outer edges of the border pixels, so pixel ``i`` has its centre at
    ``-1 + (2 i + 1) / W``. Locations outside the image read the nearest
    border value and pass no gradient to the grid. Coordinates within a tiny
    tolerance of a pixel centre are snapped onto it, so integer shifts and
    identity grids reproduce the input exactly. NaN coordinates read NaN.
    """
    grid = as_tensor(grid, dtype=inp.dtype)
    if grid.ndim != 4 or grid.shape[-1] != 2:
        raise ShapeError(f"grid must be (N, H, W, 2), got {grid.shape}")
    if inp.ndim != 4:
        raise ShapeError(f"input must be (N, C, H, W), got {inp.shape}")
    Ni, C, H, W = inp.shape
    N, Ho, Wo, _ = grid.shape
    if Ni not in (1, N):
        raise ShapeError(f"input batch {Ni} does not match grid batch {N}")
    xd = inp.data
    gd = grid.data
    dtype = np.result_type(xd, gd)
    tol = _snap_tol(dtype)

    def axis_weights(g, n):
        p = ((g + 1.0) * n - 1.0) * 0.5
        r = np.rint(p)
        p = np.where(np.abs(p - r) < tol, r, p)
        inside = (p >= 0) & (p <= n - 1)
        c = np.clip(np.where(np.isnan(p), 0.0, p), 0, n - 1)
        if n == 1:
            i0 = np.zeros(c.shape, dtype=np.int64)
            return i0, i0, np.zeros_like(c), inside
        i0 = np.minimum(np.floor(c).astype(np.int64), n - 2)
        return i0, i0 + 1, (c - i0).astype(dtype), inside

    x0, x1, wx, in_x = axis_weights(gd[..., 0].reshape(N, -1), W)
    y0, y1, wy, in_y = axis_weights(gd[..., 1].reshape(N, -1), H)
    idx = [y0 * W + x0, y0 * W + x1, y1 * W + x0, y1 * W + x1]
    flat = xd.reshape(Ni, C, H * W)
    P = Ho * Wo

    def gather(i):
        if Ni == 1:
            return flat[0][:, i.reshape(-1)].reshape(C, N, P).transpose(1, 0, 2)
        return np.take_along_axis(flat, np.broadcast_to(i[:, None, :], (N, C, P)), axis=2)

    v00, v01, v10, v11 = (gather(i) for i in idx)
    wx_, wy_ = wx[:, None, :], wy[:, None, :]
    w00 = (1 - wx_) * (1 - wy_)
    w01 = wx_ * (1 - wy_)
    w10 = (1 - wx_) * wy_
    w11 = wx_ * wy_
    out = v00 * w00 + v01 * w01 + v10 * w10 + v11 * w11
    lost = np.isnan(gd).any(axis=-1).reshape(N, 1, P)
    if lost.any():
        out = np.where(lost, np.nan, out)
    out = out.reshape(N, C, Ho, Wo).astype(dtype, copy=False)

    def bw(g):
        g = g.reshape(N, C, P)
        gi = gg = None
        if inp.requires_grad:
            if Ni == 1:
                base = (np.arange(C) * H * W)[None, :, None]
            else:
                base = ((np.arange(N)[:, None] * C + np.arange(C)[None, :]) * H * W)[:, :, None]
            keys = np.concatenate([(base + i[:, None, :]).reshape(-1) for i in idx])
            vals = np.concatenate([(g * w).reshape(-1) for w in (w00, w01, w10, w11)])
            gi = np.bincount(keys, weights=vals, minlength=Ni * C * H * W).astype(xd.dtype).reshape(xd.shape)
        if grid.requires_grad:
            dvx = (1 - wy_) * (v01 - v00) + wy_ * (v11 - v10)
            dvy = (1 - wx_) * (v10 - v00) + wx_ * (v11 - v01)
            gx = (g * dvx).sum(axis=1) * in_x * (0.5 * W if W > 1 else 0.0)
            gy = (g * dvy).sum(axis=1) * in_y * (0.5 * H if H > 1 else 0.0)
            gg = np.stack([gx, gy], axis=-1).reshape(gd.shape).astype(gd.dtype, copy=False)
        return gi, gg

    return Tensor._make(out, (inp, grid), bw)


def grid_inside(grid) -> np.ndarray:
    """Validity mask (N, 1, H', W') of grid locations inside the image."""
    g = grid.data if isinstance(grid, Tensor) else np.asarray(grid)
    ok = (np.abs(g[..., 0]) <= 1.0) & (np.abs(g[..., 1]) <= 1.0) & np.isfinite(g).all(axis=-1)
    return ok[:, None]


def pixel_centers(h: int, w: int, dtype=np.float64) -> tuple[np.ndarray, np.ndarray]:
    """Normalized x and y coordinates of pixel centres, each of shape (h, w)."""
    xs = (2.0 * np.arange(w, dtype=dtype) + 1.0) / w - 1.0
    ys = (2.0 * np.arange(h, dtype=dtype) + 1.0) / h - 1.0
    gx, gy = np.meshgrid(xs, ys)
    return gx.astype(dtype), gy.astype(dtype)


def identity_grid(n: int, h: int, w: int, dtype=np.float64) -> np.ndarray:
    gx, gy = pixel_centers(h, w, dtype)
    return np.broadcast_to(np.stack([gx, gy], axis=-1), (n, h, w, 2)).copy()


def resize(img: Tensor, size: tuple[int, int]) -> Tensor:
    """Bilinear resize to ``size`` = (h, w) on the pixel-centre grid."""
    h, w = size
    if (h, w) == img.shape[-2:]:
        return img
    grid = identity_grid(1, h, w, img.dtype)
    n, c = img.shape[:2]
    flat = img.reshape(1, n * c, *img.shape[-2:])
    return grid_sample(flat, grid).reshape(n, c, h, w)
