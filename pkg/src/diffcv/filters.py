"""Linear filtering: kernel builders, blurs, image derivatives, Sobel edges and blocks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, conv2d, exp, stack
from .autodiff.parallel import map_batch
from .autodiff.tensor import ShapeError, as_tensor, reduce_sum
from .color import check_image

SOBEL_X = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
SOBEL_Y = SOBEL_X.T.copy()
# second derivatives built from the same taps: [1,-2,1] (x) [1,2,1] and [-1,0,1] (x) [-1,0,1]
SOBEL_XX = np.outer([1.0, 2.0, 1.0], [1.0, -2.0, 1.0])
SOBEL_YY = SOBEL_XX.T.copy()
SOBEL_XY = np.outer([-1.0, 0.0, 1.0], [-1.0, 0.0, 1.0])
LAPLACE_4 = np.array([[0.0, 1.0, 0.0], [1.0, -4.0, 1.0], [0.0, 1.0, 0.0]])

_SUM_ONE = ("gaussian", "box")
_SUM_ZERO = ("laplace", "sobel_x", "sobel_y")


@dataclass
class Kernel2d:
    weights: Tensor
    kind: str = "custom"
    # (column factor, row factor) when weights == outer(col, row)
    factors: tuple[Tensor, Tensor] | None = None

    @property
    def size(self) -> tuple[int, int]:
        return self.weights.shape

    def validate(self) -> None:
        kh, kw = self.weights.shape
        if kh % 2 == 0 or kw % 2 == 0:
            raise ValueError(f"kernel extents must be odd, got {kh}x{kw}")
        total = float(self.weights.data.sum())
        if self.kind in _SUM_ONE and abs(total - 1.0) > 1e-6:
            raise ValueError(f"{self.kind} kernel must sum to 1, sums to {total}")
        if self.kind in _SUM_ZERO and abs(total) > 1e-6:
            raise ValueError(f"{self.kind} kernel must sum to 0, sums to {total}")


def _check_ksize(ksize: int) -> None:
    if int(ksize) != ksize or ksize < 1 or ksize % 2 == 0:
        raise ValueError(f"kernel size must be a positive odd integer, got {ksize}")


def gaussian_1d(ksize: int, sigma) -> Tensor:
    _check_ksize(ksize)
    sigma = as_tensor(sigma)
    if np.any(sigma.data <= 0):
        raise ValueError(f"sigma must be positive, got {sigma.data}")
    x = Tensor(np.arange(ksize, dtype=sigma.dtype) - ksize // 2)
    g = exp(-(x * x) / (sigma * sigma * 2.0))
    return g / reduce_sum(g)


def make_gaussian_kernel(ksize: int, sigma) -> Kernel2d:
    """Normalized separable Gaussian; differentiable w.r.t. ``sigma``."""
    g = gaussian_1d(ksize, sigma)
    w = g.reshape(ksize, 1) * g.reshape(1, ksize)
    return Kernel2d(w, "gaussian", (g, g))


def make_box_kernel(ksize: int) -> Kernel2d:
    _check_ksize(ksize)
    r = Tensor(np.full(ksize, 1.0 / ksize))
    return Kernel2d(Tensor(np.full((ksize, ksize), 1.0 / ksize**2)), "box", (r, r))


def make_laplace_kernel() -> Kernel2d:
    return Kernel2d(Tensor(LAPLACE_4), "laplace")


def make_sobel_kernel(axis: str) -> Kernel2d:
    if axis == "x":
        return Kernel2d(Tensor(SOBEL_X), "sobel_x", (Tensor([1.0, 2.0, 1.0]), Tensor([-1.0, 0.0, 1.0])))
    if axis == "y":
        return Kernel2d(Tensor(SOBEL_Y), "sobel_y", (Tensor([-1.0, 0.0, 1.0]), Tensor([1.0, 2.0, 1.0])))
    raise ValueError(f"axis must be 'x' or 'y', got {axis!r}")


def gaussian_ksize(sigma: float, truncate: float = 3.0) -> int:
    return 2 * int(np.ceil(truncate * sigma)) + 1


def _depthwise(img: Tensor, weights: Tensor, padding: str) -> Tensor:
    n, c, h, w = img.shape
    kh, kw = weights.shape[-2:]
    out = conv2d(img.reshape(n * c, 1, h, w), weights.reshape(-1, 1, kh, kw).astype(img.dtype), padding)
    return out.reshape(n, c, -1, h, w) if weights.ndim == 3 else out.reshape(n, c, h, w)


def blur(img: Tensor, kernel: Kernel2d, padding: str = "replicate") -> Tensor:
    """Filter every channel independently with ``kernel``; output has the input's size."""
    check_image(img)
    kernel.validate()
    if kernel.factors is not None:
        col, row = kernel.factors
        out = _depthwise(img, row.reshape(1, -1), padding)
        return _depthwise(out, col.reshape(-1, 1), padding)
    return _depthwise(img, kernel.weights, padding)


def gaussian_blur(img: Tensor, ksize: int, sigma, padding: str = "replicate") -> Tensor:
    return blur(img, make_gaussian_kernel(ksize, sigma), padding)


def box_blur(img: Tensor, ksize: int, padding: str = "replicate") -> Tensor:
    return blur(img, make_box_kernel(ksize), padding)


def laplacian(img: Tensor, padding: str = "replicate") -> Tensor:
    return blur(img, make_laplace_kernel(), padding)


_SMOOTH = np.array([1.0, 2.0, 1.0])
_DIFF = np.array([-1.0, 0.0, 1.0])
_SECOND = np.array([1.0, -2.0, 1.0])
# (column factor, row factor) of each Sobel kernel
_SOBEL_FACTORS = {
    1: ((_SMOOTH, _DIFF), (_DIFF, _SMOOTH)),
    2: ((_SMOOTH, _SECOND), (_DIFF, _DIFF), (_SECOND, _SMOOTH)),
}


def spatial_gradient(img: Tensor, order: int = 1, padding: str = "replicate") -> Tensor:
    """Sobel derivatives stacked on a new axis: (N, C, 2, H, W) for (dx, dy)
    or (N, C, 3, H, W) for (dxx, dxy, dyy). Taps are unnormalized.

    Each kernel is applied as a column pass followed by a row pass.
    """
    check_image(img)
    if order not in _SOBEL_FACTORS:
        raise ValueError(f"order must be 1 or 2, got {order}")
    outs = []
    for col, row in _SOBEL_FACTORS[order]:
        t = _depthwise(img, Tensor(col.reshape(-1, 1).astype(img.dtype)), padding)
        outs.append(_depthwise(t, Tensor(row.reshape(1, -1).astype(img.dtype)), padding))
    return stack(outs, axis=2)


def sobel_eps(dtype) -> float:
    return 1e-12 if np.dtype(dtype) == np.float64 else 1e-6


def _pad_edge(x: np.ndarray) -> np.ndarray:
    return np.pad(x, [(0, 0)] * (x.ndim - 2) + [(1, 1), (1, 1)], mode="edge")


def _sobel_xy(p: np.ndarray, gx_out: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Sobel dx and dy of an edge-padded (..., H+2, W+2) array."""
    s = p[..., :-2, :] + 2 * p[..., 1:-1, :] + p[..., 2:, :]
    gx = np.subtract(s[..., 2:], s[..., :-2], out=gx_out)
    d = p[..., 2:, :] - p[..., :-2, :]
    gy = d[..., :-2] + 2 * d[..., 1:-1] + d[..., 2:]
    return gx, gy


def _sobel_xy_adjoint(ax: np.ndarray, ay: np.ndarray) -> np.ndarray:
    """Transpose of ``_sobel_xy`` composed with edge padding."""
    *lead, h, w = ax.shape
    gp = np.zeros((*lead, h + 2, w + 2), dtype=ax.dtype)
    gs = np.zeros((*lead, h, w + 2), dtype=ax.dtype)
    gs[..., 2:] += ax
    gs[..., :-2] -= ax
    gp[..., :-2, :] += gs
    gp[..., 1:-1, :] += 2 * gs
    gp[..., 2:, :] += gs
    gd = np.zeros_like(gs)
    gd[..., :-2] += ay
    gd[..., 1:-1] += 2 * ay
    gd[..., 2:] += ay
    gp[..., 2:, :] += gd
    gp[..., :-2, :] -= gd
    # replicated border cells pass their gradient back to the edge they copy
    gp[..., 1, :] += gp[..., 0, :]
    gp[..., -2, :] += gp[..., -1, :]
    gp[..., :, 1] += gp[..., :, 0]
    gp[..., :, -2] += gp[..., :, -1]
    return gp[..., 1:-1, 1:-1]


def _edges_chunk(x: np.ndarray, eps: float) -> np.ndarray:
    out = np.empty_like(x)
    # one image at a time keeps the working set in cache
    for i in range(len(x)):
        gx, gy = _sobel_xy(_pad_edge(x[i]), out[i])
        gx *= gx
        gy *= gy
        gx += gy
        gx += eps
        np.sqrt(gx, out=gx)
    return out


def sobel_edges(img: Tensor, eps: float | None = None) -> Tensor:
    """Gradient magnitude sqrt(dx^2 + dy^2 + eps) per channel.

    Same value as ``sqrt(dx*dx + dy*dy + eps)`` on ``spatial_gradient``, fused
    into one pass per image and split over the batch by the thread pool. The
    backward pass is written out.
    """
    check_image(img)
    eps = sobel_eps(img.dtype) if eps is None else eps
    x = img.data
    out = map_batch(lambda a: _edges_chunk(a, eps), x)

    def bw(g):
        gx, gy = _sobel_xy(_pad_edge(x))
        return (_sobel_xy_adjoint(g * gx / out, g * gy / out),)

    return Tensor._make(out, (img,), bw)


def extract_blocks(img: Tensor, block: tuple[int, int], stride: tuple[int, int]) -> Tensor:
    """All fully-contained windows, row-major: (N, L, C, bh, bw)."""
    check_image(img)
    n, c, h, w = img.shape
    bh, bw = block
    sh, sw = stride
    if bh > h or bw > w:
        raise ShapeError(f"block {block} larger than image {(h, w)}")
    if sh < 1 or sw < 1:
        raise ValueError("strides must be >= 1")
    rows = np.arange(0, h - bh + 1, sh)[:, None] + np.arange(bh)[None, :]
    cols = np.arange(0, w - bw + 1, sw)[:, None] + np.arange(bw)[None, :]
    nr, nc = len(rows), len(cols)
    idx = (slice(None), slice(None), rows[:, :, None, None], cols[None, None, :, :])
    win = img[idx]  # (N, C, nr, bh, nc, bw)
    return win.permute(0, 2, 4, 1, 3, 5).reshape(n, nr * nc, c, bh, bw)
