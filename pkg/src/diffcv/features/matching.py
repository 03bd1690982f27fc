"""Descriptor matching and reprojection-based pairing (non-differentiable selection)."""

from __future__ import annotations

import numpy as np

_CHUNK_ELEMS = 1 << 24


def pairwise_l2(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Exact (K1, K2) Euclidean distances, computed directly in row chunks."""
    a = np.asarray(a)
    b = np.asarray(b)
    out = np.empty((len(a), len(b)), dtype=np.result_type(a, b, np.float32))
    if len(a) == 0 or len(b) == 0:
        return out
    rows = max(1, _CHUNK_ELEMS // max(1, b.size))
    for s in range(0, len(a), rows):
        d = a[s : s + rows, None, :] - b[None, :, :]
        out[s : s + rows] = np.sqrt(np.einsum("ijk,ijk->ij", d, d))
    return out


def match_descriptors(da, db, policy: str = "snn_ratio", ratio: float = 0.8) -> np.ndarray:
    """Mutual nearest neighbours, optionally filtered by the second-nearest ratio.

    Returns an (M, 3) array of (i, j, distance) rows sorted by i. Ties in
    distance resolve to the lower index. With ``snn_ratio`` a pair is kept
    when d1 < ratio * d2 for the second-nearest d2 in ``db``; with a single
    candidate the test passes.
    """
    if policy not in ("mnn", "snn_ratio"):
        raise ValueError(f"unknown matching policy {policy!r}")
    da = np.asarray(da.data if hasattr(da, "data") else da)
    db = np.asarray(db.data if hasattr(db, "data") else db)
    if len(da) == 0 or len(db) == 0:
        return np.zeros((0, 3))
    d = pairwise_l2(da, db)
    nn_ab = np.argmin(d, axis=1)
    nn_ba = np.argmin(d, axis=0)
    i = np.arange(len(da))
    keep = nn_ba[nn_ab] == i
    d1 = d[i, nn_ab]
    if policy == "snn_ratio" and d.shape[1] > 1:
        masked = d.copy()
        masked[i, nn_ab] = np.inf
        d2 = masked.min(axis=1)
        keep &= d1 < ratio * d2
    sel = np.flatnonzero(keep)
    return np.stack([sel.astype(float), nn_ab[sel].astype(float), d1[sel].astype(float)], axis=1)


def pair_by_reprojection(xy_a: np.ndarray, xy_b_in_a: np.ndarray, radius: float):
    """Pair each a-keypoint with the closest reprojected b-keypoint within ``radius``.

    Returns (ia, ib, dist) where ``dist`` is the full (Ka, Kb) reprojection
    distance matrix (useful for hard-negative mining).
    """
    dist = pairwise_l2(np.asarray(xy_a, dtype=float), np.asarray(xy_b_in_a, dtype=float))
    if dist.size == 0:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty, dist
    nn = np.argmin(dist, axis=1)
    ia = np.flatnonzero(dist[np.arange(len(nn)), nn] < radius)
    return ia, nn[ia], dist


def mine_hard_negatives(desc_a: np.ndarray, desc_b: np.ndarray, reproj_rows: np.ndarray, min_dist: float):
    """Index of the closest b-descriptor among b-keypoints farther than ``min_dist``.

    Returns (neg, keep); anchors with no eligible candidate have keep False.
    """
    d = pairwise_l2(desc_a, desc_b)
    d = np.where(reproj_rows > min_dist, d, np.inf)
    neg = np.argmin(d, axis=1) if d.shape[1] else np.zeros(len(d), dtype=np.int64)
    keep = np.isfinite(d[np.arange(len(d)), neg]) if d.shape[1] else np.zeros(len(d), dtype=bool)
    return neg, keep


def consistent_matches(matches: np.ndarray, xy_a: np.ndarray, xy_b: np.ndarray, H_b_to_a: np.ndarray,
                       threshold: float = 3.0) -> np.ndarray:
    """Boolean mask of matches whose b-point maps within ``threshold`` px of its a-point."""
    if len(matches) == 0:
        return np.zeros(0, dtype=bool)
    ia = matches[:, 0].astype(np.int64)
    ib = matches[:, 1].astype(np.int64)
    pb = np.concatenate([xy_b[ib], np.ones((len(ib), 1))], axis=1) @ np.asarray(H_b_to_a, dtype=float).T
    with np.errstate(divide="ignore", invalid="ignore"):
        proj = pb[:, :2] / pb[:, 2:]
    err = np.linalg.norm(proj - xy_a[ia], axis=1)
    return np.isfinite(err) & (err < threshold)
