"""White-box attack that edits two images so their features match under a chosen homography."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from ..autodiff import Adam, Tensor, no_grad
from ..features import DetectorConfig, consistent_matches, detect_and_describe, match_descriptors, ransac_homography
from ..losses import AttackLossWeights, attack_losses
from .pyramid import NumericError


@dataclass
class AttackConfig:
    steps: int = 1000
    lr: float = 0.003
    anneal: bool = True
    k: int = 2500
    pair_radius: float = 8.0
    hinge: bool = True
    consistency_px: float = 3.0
    ratio: float = 0.8
    ransac_iters: int = 1000
    ransac_px: float = 3.0
    seed: int = 0
    detector: DetectorConfig = field(default_factory=lambda: DetectorConfig(upright=True))
    weights: AttackLossWeights = field(default_factory=AttackLossWeights)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class MatchReport:
    features_a: int
    features_b: int
    matches: int
    consistent: int
    ransac_inliers: int
    ransac_consistent: int

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class AttackResult:
    img_a: np.ndarray
    img_b: np.ndarray
    before: MatchReport
    after: MatchReport
    losses: list[dict]


def evaluate_matches(img_a: Tensor, img_b: Tensor, H_b_to_a: np.ndarray, cfg: AttackConfig) -> MatchReport:
    """Match features of both images and count those agreeing with ``H_b_to_a``.

    Matching uses mutual nearest neighbours with the ratio test. RANSAC is
    run on the matches (b points to a points); ``ransac_inliers`` counts its
    consensus set and ``ransac_consistent`` the part of it that also agrees
    with the target homography.
    """
    with no_grad():
        fa = detect_and_describe(img_a, cfg.k, cfg.detector)
        fb = detect_and_describe(img_b, cfg.k, cfg.detector)
    m = match_descriptors(fa.desc.data, fb.desc.data, "snn_ratio", cfg.ratio)
    ok = consistent_matches(m, fa.xy.data, fb.xy.data, H_b_to_a, cfg.consistency_px)
    inliers = consistent = 0
    if len(m) >= 4:
        ia, ib = m[:, 0].astype(int), m[:, 1].astype(int)
        _, mask = ransac_homography(fb.xy.data[ib], fa.xy.data[ia], cfg.ransac_iters, cfg.ransac_px, cfg.seed)
        inliers = int(mask.sum())
        consistent = int((mask & ok).sum())
    return MatchReport(len(fa), len(fb), len(m), int(ok.sum()), inliers, consistent)


def attack(img_a: Tensor, img_b: Tensor, H_b_to_a: np.ndarray, cfg: AttackConfig | None = None,
           on_step=None) -> AttackResult:
    """Optimize the pixels of both images with Adam on L_loc + alpha L_desc + beta L_reg.

    Keypoint selection and pairing are recomputed at every step on the
    current images and held fixed while differentiating. Pixel values are
    clipped to [0, 1] after each update. With ``cfg.anneal`` the rate follows
    a cosine from ``cfg.lr`` down to zero over the run, which stops late
    steps from undoing earlier progress. ``on_step(step, record)`` receives
    the per-step loss record.
    """
    cfg = cfg or AttackConfig()
    H = np.asarray(H_b_to_a, dtype=float)
    a0 = img_a.data.copy()
    b0 = img_b.data.copy()
    a = Tensor(a0.copy(), requires_grad=True)
    b = Tensor(b0.copy(), requires_grad=True)
    before = evaluate_matches(a.detach(), b.detach(), H, cfg)
    opt = Adam([a, b], lr=cfg.lr)
    log = []
    for step in range(cfg.steps):
        if cfg.anneal:
            opt.hyper.lr = cfg.lr * 0.5 * (1.0 + np.cos(np.pi * step / cfg.steps))
        opt.zero_grad()
        fa = detect_and_describe(a, cfg.k, cfg.detector)
        fb = detect_and_describe(b, cfg.k, cfg.detector)
        total, l_loc, l_desc, l_reg = attack_losses(
            fa, fb, H, [a, b], [a0, b0], cfg.weights, cfg.pair_radius, cfg.hinge
        )
        value = total.item()
        if not np.isfinite(value):
            raise NumericError(f"non-finite attack loss at step {step}")
        total.backward()
        opt.step()
        for t in (a, b):
            np.clip(t.data, 0.0, 1.0, out=t.data)
        rec = {"step": step, "total": value, "loc": l_loc.item(), "desc": l_desc.item(), "reg": l_reg.item()}
        log.append(rec)
        if on_step is not None:
            on_step(step, rec)
    after = evaluate_matches(a.detach(), b.detach(), H, cfg)
    return AttackResult(a.data.copy(), b.data.copy(), before, after, log)
