"""Seeded synthetic scenes with exact ground truth."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..autodiff import Tensor, grid_sample, no_grad, resize
from ..filters import gaussian_blur
from ..geometry import PinholeCamera, intrinsics, make_pose


def value_noise(h: int, w: int, seed: int, channels: int = 3, base_cells: int = 4, octaves: int = 6,
                persistence: float = 0.65, dtype=np.float64) -> Tensor:
    """Multi-octave bilinear value noise in [0, 1], (1, C, h, w).

    Octave ``i`` is a random lattice of ``base_cells * 2^i`` cells along the
    shorter side, upsampled bilinearly; amplitudes fall by ``persistence``.
    """
    rng = np.random.default_rng(seed)
    out = np.zeros((1, channels, h, w))
    total = 0.0
    amp = 1.0
    short = min(h, w)
    for i in range(octaves):
        cells = base_cells * 2**i
        if cells > short:
            break
        gh = max(2, int(round(cells * h / short)))
        gw = max(2, int(round(cells * w / short)))
        lattice = Tensor(rng.random((1, channels, gh, gw)))
        with no_grad():
            out += amp * resize(lattice, (h, w)).data
        total += amp
        amp *= persistence
    out /= total
    lo, hi = out.min(), out.max()
    out = (out - lo) / max(hi - lo, 1e-12)
    return Tensor(out.astype(dtype))


def blob_noise(h: int, w: int, seed: int, channels: int = 3, sigma: float = 2.0, clip_pct: float = 1.0,
               dtype=np.float64) -> Tensor:
    """Gaussian-blurred white noise in [0, 1], (1, C, h, w).

    Contrast is stretched so the ``clip_pct`` and ``100 - clip_pct``
    percentiles map to 0 and 1, then clipped. At sigma 2 the texture is a
    dense field of blobs near the finest detector scale, which gives about
    1000 scale-space features at 320x240, far more than value noise.
    """
    rng = np.random.default_rng(seed)
    noise = Tensor(rng.random((1, channels, h, w)))
    with no_grad():
        out = gaussian_blur(noise, 2 * int(3 * sigma) + 1, sigma).data
    lo, hi = np.percentile(out, [clip_pct, 100.0 - clip_pct])
    out = np.clip((out - lo) / max(hi - lo, 1e-12), 0.0, 1.0)
    return Tensor(out.astype(dtype))


def _corner_square() -> np.ndarray:
    return np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])


def homography_from_corners(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Exact 3x3 H with dst ~ H src for four point pairs (h33 = 1)."""
    a, b = [], []
    for (x, y), (u, v) in zip(src, dst):
        a.append([x, y, 1, 0, 0, 0, -u * x, -u * y])
        a.append([0, 0, 0, x, y, 1, -v * x, -v * y])
        b += [u, v]
    h = np.linalg.solve(np.array(a), np.array(b))
    return np.append(h, 1.0).reshape(3, 3)


def random_homography(seed: int, max_shift: float = 0.1) -> np.ndarray:
    """Normalized-coordinate H moving each image corner by at most ``max_shift`` of the width.

    Displacements are drawn uniformly in a disc; normalized units span 2 per width.
    """
    rng = np.random.default_rng(seed)
    r = 2.0 * max_shift * np.sqrt(rng.random(4))
    phi = rng.random(4) * 2 * np.pi
    corners = _corner_square()
    moved = corners + np.stack([r * np.cos(phi), r * np.sin(phi)], axis=1)
    return homography_from_corners(corners, moved)


def normalized_to_pixel_homography(H: np.ndarray, height: int, width: int) -> np.ndarray:
    """Express a normalized-coordinate homography in pixel-centre coordinates."""
    N = np.array([[2.0 / width, 0, 1.0 / width - 1], [0, 2.0 / height, 1.0 / height - 1], [0, 0, 1.0]])
    P = np.linalg.inv(N) @ H @ N
    return P / P[2, 2]


def corner_error(H_est: np.ndarray, H_true: np.ndarray, height: int, width: int) -> float:
    """Mean distance (pixels) between the image corners mapped by both normalized homographies."""
    pe = normalized_to_pixel_homography(np.asarray(H_est, float), height, width)
    pt = normalized_to_pixel_homography(np.asarray(H_true, float), height, width)
    c = np.array([[0, 0, 1], [width - 1, 0, 1], [width - 1, height - 1, 1], [0, height - 1, 1]], float)
    a = c @ pe.T
    b = c @ pt.T
    return float(np.linalg.norm(a[:, :2] / a[:, 2:] - b[:, :2] / b[:, 2:], axis=1).mean())


@dataclass
class HomographyPair:
    src: Tensor
    dst: Tensor
    H: np.ndarray  # normalized coordinates; dst(q) = src(H q)


def _sample_canvas(canvas: Tensor, pts: np.ndarray, span: float) -> Tensor:
    """Sample a canvas spanning ``[-span, span]`` (image-normalized units) at (h, w, 2) points."""
    grid = (pts / span)[None]
    with no_grad():
        return grid_sample(canvas, Tensor(grid.astype(canvas.dtype)))


def textured_homography_pair(seed: int, size: tuple[int, int] = (256, 256), max_shift: float = 0.1,
                             H: np.ndarray | None = None, dtype=np.float64) -> HomographyPair:
    """Render ``src`` and ``dst(q) = src(H q)`` from one larger texture canvas.

    Both images are sampled from the canvas directly, so ``dst`` has no
    invalid border even where ``H q`` leaves the source frame.
    """
    h, w = size
    if h < 8 or w < 8:
        raise ValueError("images must be at least 8x8")
    if not 0 <= max_shift < 0.5:
        raise ValueError("max_shift must lie in [0, 0.5)")
    H = random_homography(seed + 1, max_shift) if H is None else np.asarray(H, dtype=float)
    span = 2.0
    canvas = value_noise(int(h * span), int(w * span), seed, dtype=np.float64)
    xs = (2.0 * np.arange(w) + 1.0) / w - 1.0
    ys = (2.0 * np.arange(h) + 1.0) / h - 1.0
    gx, gy = np.meshgrid(xs, ys)
    pts = np.stack([gx, gy], axis=-1)
    src = _sample_canvas(canvas, pts, span)
    ph = np.concatenate([pts, np.ones((h, w, 1))], axis=-1) @ H.T
    q = ph[..., :2] / ph[..., 2:]
    if np.allclose(H, np.eye(3)):
        dst = Tensor(src.data.copy())
    else:
        dst = _sample_canvas(canvas, q, span)
    return HomographyPair(src.astype(dtype), dst.astype(dtype), H)


@dataclass
class PlaneScene:
    images: list[Tensor]
    cameras: list[PinholeCamera]
    depth: np.ndarray  # ground-truth depth of view ``ref`` (1, 1, H, W)
    ref: int = 0


def plane_scene(seed: int, size: tuple[int, int] = (240, 320), depth: float = 2.0, baseline: float = 0.1,
                focal: float = 300.0, n_views: int = 3, dtype=np.float64) -> PlaneScene:
    """Fronto-parallel textured plane ``z = depth`` seen by cameras along the x axis.

    View 0 is the reference at the origin with identity pose; the others sit
    at x = +baseline, -baseline, +2 baseline, ... Each image is rendered by
    intersecting pixel rays with the plane and sampling a texture attached to
    the plane, so the ground-truth depth of the reference view is constant.
    """
    h, w = size
    if depth <= 0 or focal <= 0:
        raise ValueError("depth and focal length must be positive")
    if n_views < 2:
        raise ValueError("need at least two views")
    K = intrinsics(focal, focal, (w - 1) / 2.0, (h - 1) / 2.0)
    offsets = [0.0] + [baseline * ((i + 1) // 2) * (1 if i % 2 else -1) for i in range(1, n_views)]
    # plane texture extent in world units, wide enough for every view
    half_x = depth * (w / 2.0) / focal + 2.0 * baseline * n_views
    half_y = depth * (h / 2.0) / focal + 2.0 * baseline * n_views
    canvas = value_noise(2 * h, int(round(2 * h * half_x / half_y)), seed, dtype=np.float64)
    xs = np.arange(w, dtype=float)
    ys = np.arange(h, dtype=float)
    px, py = np.meshgrid(xs, ys)
    images, cameras = [], []
    for cx in offsets:
        T = make_pose(np.eye(3), np.array([-cx, 0.0, 0.0])).data  # world to camera
        X = cx + (px - K[0, 2]) / K[0, 0] * depth
        Y = (py - K[1, 2]) / K[1, 1] * depth
        grid = np.stack([X / half_x, Y / half_y], axis=-1)[None]
        with no_grad():
            img = grid_sample(canvas, Tensor(grid))
        images.append(img.astype(dtype))
        cameras.append(PinholeCamera(K.astype(dtype), T.astype(dtype), h, w))
    return PlaneScene(images, cameras, np.full((1, 1, h, w), depth, dtype=dtype), 0)


def synth_scene(kind: str, seed: int, **params):
    if kind == "plane":
        return plane_scene(seed, **params)
    if kind in ("homography", "textured_homography_pair"):
        return textured_homography_pair(seed, **params)
    raise ValueError(f"unknown scene kind {kind!r}")
