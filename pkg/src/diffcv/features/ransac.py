"""RANSAC homography estimation with the normalized 4-point DLT."""

from __future__ import annotations

import numpy as np


def _normalizer(pts: np.ndarray) -> np.ndarray:
    c = pts.mean(axis=0)
    d = np.sqrt(((pts - c) ** 2).sum(axis=1)).mean()
    s = np.sqrt(2.0) / d if d > 0 else 1.0
    return np.array([[s, 0.0, -s * c[0]], [0.0, s, -s * c[1]], [0.0, 0.0, 1.0]])


def dlt_homography(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Least-squares homography (dst ~ H src) from >= 4 points, normalized DLT."""
    src = np.asarray(src, dtype=float)
    dst = np.asarray(dst, dtype=float)
    if len(src) < 4 or src.shape != dst.shape:
        raise ValueError(f"need >= 4 matching point pairs, got {src.shape} and {dst.shape}")
    ts, td = _normalizer(src), _normalizer(dst)
    s = np.c_[src, np.ones(len(src))] @ ts.T
    d = np.c_[dst, np.ones(len(dst))] @ td.T
    n = len(s)
    a = np.zeros((2 * n, 9))
    a[0::2, 0:3] = s
    a[0::2, 6:9] = -d[:, 0:1] * s
    a[1::2, 3:6] = s
    a[1::2, 6:9] = -d[:, 1:2] * s
    _, _, vt = np.linalg.svd(a)
    h = vt[-1].reshape(3, 3)
    H = np.linalg.inv(td) @ h @ ts
    return H / H[2, 2] if abs(H[2, 2]) > 1e-12 else H / np.linalg.norm(H)


def reprojection_error(H: np.ndarray, src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    p = np.c_[src, np.ones(len(src))] @ H.T
    with np.errstate(divide="ignore", invalid="ignore"):
        proj = p[:, :2] / p[:, 2:]
    err = np.linalg.norm(proj - dst, axis=1)
    return np.where(np.isfinite(err), err, np.inf)


def _collinear(p: np.ndarray, tol: float) -> np.ndarray:
    """(S, 4, 2) samples -> True where any three of the four points are collinear."""
    bad = np.zeros(len(p), dtype=bool)
    for i, j, k in ((0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)):
        u = p[:, j] - p[:, i]
        v = p[:, k] - p[:, i]
        area = np.abs(u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0])
        scale = np.maximum((u**2).sum(1), (v**2).sum(1))
        bad |= area <= tol * np.maximum(scale, 1e-300)
    return bad


def _minimal_solutions(s: np.ndarray, d: np.ndarray):
    """Exact homographies (h33 = 1) for (S, 4, 2) point quadruples."""
    S = len(s)
    a = np.zeros((S, 8, 8))
    b = np.zeros((S, 8))
    x, y = s[..., 0], s[..., 1]
    u, v = d[..., 0], d[..., 1]
    a[:, 0::2, 0] = x
    a[:, 0::2, 1] = y
    a[:, 0::2, 2] = 1
    a[:, 0::2, 6] = -u * x
    a[:, 0::2, 7] = -u * y
    a[:, 1::2, 3] = x
    a[:, 1::2, 4] = y
    a[:, 1::2, 5] = 1
    a[:, 1::2, 6] = -v * x
    a[:, 1::2, 7] = -v * y
    b[:, 0::2] = u
    b[:, 1::2] = v
    ok = np.abs(np.linalg.det(a)) > 1e-12
    h = np.zeros((S, 9))
    h[:, 8] = 1
    if ok.any():
        h[ok, :8] = np.linalg.solve(a[ok], b[ok][..., None])[..., 0]
    return h.reshape(S, 3, 3), ok


def ransac_homography(src, dst, iters: int = 1000, inlier_thresh: float = 3.0, seed: int = 0,
                      collinear_tol: float = 1e-6, max_resample: int = 10):
    """Robust homography with dst ~ H src.

    Draws ``iters`` 4-point hypotheses from a seeded generator; samples with
    three collinear points (in either image) are redrawn. The hypothesis
    with the most inliers is refit by least squares on its inliers and the
    inlier set is recomputed with the refit model.
    Returns (H, inlier mask).
    """
    src = np.asarray(src, dtype=float)
    dst = np.asarray(dst, dtype=float)
    n = len(src)
    if n < 4 or dst.shape != src.shape:
        raise ValueError(f"need >= 4 correspondences, got {n}")
    rng = np.random.default_rng(seed)
    idx = np.stack([rng.choice(n, 4, replace=False) for _ in range(iters)])
    for _ in range(max_resample):
        bad = _collinear(src[idx], collinear_tol) | _collinear(dst[idx], collinear_tol)
        if not bad.any():
            break
        idx[bad] = np.stack([rng.choice(n, 4, replace=False) for _ in range(int(bad.sum()))])
    else:
        bad = _collinear(src[idx], collinear_tol) | _collinear(dst[idx], collinear_tol)
        idx = idx[~bad]
    if len(idx) == 0:
        raise ValueError("all samples are degenerate (collinear points)")

    hs, ok = _minimal_solutions(src[idx], dst[idx])
    hs = hs[ok]
    if len(hs) == 0:
        raise ValueError("no non-degenerate homography hypothesis")
    ph = np.c_[src, np.ones(n)]
    proj = np.einsum("sij,nj->sni", hs, ph)
    with np.errstate(divide="ignore", invalid="ignore"):
        err = np.linalg.norm(proj[..., :2] / proj[..., 2:] - dst[None], axis=-1)
    counts = (np.nan_to_num(err, nan=np.inf) < inlier_thresh).sum(axis=1)
    best = int(np.argmax(counts))  # first hypothesis wins ties
    inliers = np.nan_to_num(err[best], nan=np.inf) < inlier_thresh
    H = hs[best]
    if inliers.sum() >= 4:
        H = dlt_homography(src[inliers], dst[inliers])
        refit = reprojection_error(H, src, dst) < inlier_thresh
        if refit.sum() >= inliers.sum():
            inliers = refit
        else:
            H = hs[best]
    return H, inliers
