"""Multi-view depth estimation by coarse-to-fine gradient descent."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..autodiff import OptimizerHyper, Tensor, make_optimizer, no_grad, resize, softplus
from ..geometry import PinholeCamera, depth_warp
from ..losses import DepthLossWeights, depth_total_loss, smoothness_loss
from .pyramid import NumericError, PyramidSchedule, build_pyramid

D_MIN = 1e-3


def depth_schedule(levels: int = 7, iters: int = 500, lr: float = 2.0, momentum: float = 0.9) -> PyramidSchedule:
    return PyramidSchedule(levels, 2, iters, "sgd_momentum", OptimizerHyper(lr=lr, momentum=momentum))


def inverse_softplus(y: np.ndarray) -> np.ndarray:
    y = np.maximum(y, 1e-6)
    return np.where(y > 20, y, np.log(np.expm1(np.minimum(y, 20))))


def depth_from_param(z: Tensor) -> Tensor:
    """Positive depth: softplus(z) + 1e-3."""
    return softplus(z) + D_MIN


@dataclass
class DepthResult:
    depth: np.ndarray  # (1, 1, H, W) for the reference view
    losses: list[list[float]]
    error_maps: list[np.ndarray]  # mean abs photometric error per level, coarse to fine
    initial_loss: float
    final_loss: float
    level_sizes: list[tuple[int, int]] = field(default_factory=list)

    def smoothness(self, guide: Tensor) -> float:
        return float(smoothness_loss(Tensor(self.depth), guide).item())


def solve_depth(
    images: list[Tensor],
    cameras: list[PinholeCamera],
    ref: int = 0,
    schedule: PyramidSchedule | None = None,
    weights: DepthLossWeights | None = None,
    seed: int = 0,
    window: int = 5,
    lr_exponent: float = 0.5,
    anneal: bool = True,
    on_level_end=None,
) -> DepthResult:
    """Optimize a per-pixel depth map for view ``ref`` against the other views.

    Depth lives at the resolution of the current pyramid level, is upsampled
    bilinearly to full resolution and evaluated with the full loss against
    low-passed images (the level's pyramid image upsampled to full size).
    It starts from uniform [0, 1) noise at the coarsest level and each finer
    level starts from the upsampled previous solution. The learning rate is
    multiplied by ``n ** lr_exponent`` for ``n`` depth unknowns: with a mean
    loss the gradient per unknown shrinks like 1/n, and the square root keeps
    coarse levels moving without letting the fine level chatter.
    With ``anneal`` the rate follows a cosine from that value down to zero
    within each level. The smoothness term is an L1 penalty, so a fixed
    step keeps bouncing around its minimum with an amplitude proportional
    to lr * lambda; annealing lets every level settle.
    ``on_level_end(level, depth, losses)`` is called after every level.
    """
    schedule = schedule or depth_schedule()
    weights = weights or DepthLossWeights()
    if len(images) < 2 or len(images) != len(cameras):
        raise ValueError("need at least two images with one camera each")
    if not 0 <= ref < len(images):
        raise ValueError(f"reference index {ref} out of range")
    h, w = images[ref].shape[-2:]
    dtype = images[ref].dtype
    others = [i for i in range(len(images)) if i != ref]

    with no_grad():
        pyrs = [build_pyramid(img, schedule.levels) for img in images]
        n_levels = min(len(p) for p in pyrs)
        lowpass = [[resize(p[l], (h, w)) for l in range(n_levels)] for p in pyrs]
    sizes = [pyrs[ref][l].shape[-2:] for l in range(n_levels)]

    rng = np.random.default_rng(seed)
    hc, wc = sizes[-1]
    z = Tensor(inverse_softplus(rng.random((1, 1, hc, wc)) - D_MIN).astype(dtype), requires_grad=True)

    def loss_at(level: int, zp: Tensor):
        depth = resize(depth_from_param(zp), (h, w))
        warped, masks = [], []
        for i in others:
            wi, mi = depth_warp(lowpass[i][level], cameras[i], cameras[ref], depth)
            warped.append(wi)
            masks.append(mi)
        return depth_total_loss(lowpass[ref][level], warped, masks, depth, weights, window), warped

    with no_grad():
        initial = float(loss_at(0, z)[0].item())
    trace, errors = [], []
    for level in reversed(range(n_levels)):
        lh, lw = sizes[level]
        if z.shape[-2:] != (lh, lw):
            with no_grad():
                z = Tensor(resize(z, (lh, lw)).data, requires_grad=True)
        hyper = OptimizerHyper(**{**schedule.hyper.__dict__})
        base_lr = schedule.hyper.lr * float(lh * lw) ** lr_exponent
        hyper.lr = base_lr
        opt = make_optimizer(schedule.optimizer, [z], hyper)
        n_iter = schedule.iters_per_level
        level_trace = []
        for it in range(n_iter):
            if anneal:
                opt.hyper.lr = base_lr * 0.5 * (1.0 + np.cos(np.pi * it / n_iter))
            z.grad = None
            loss, _ = loss_at(level, z)
            value = loss.item()
            if not np.isfinite(value):
                raise NumericError(f"non-finite depth loss at level {level}")
            loss.backward()
            opt.step()
            if not np.isfinite(z.data).all():
                raise NumericError(f"depth diverged at level {level}")
            level_trace.append(value)
        trace.append(level_trace)
        with no_grad():
            _, warped = loss_at(level, z)
            err = np.mean([np.abs(wv.data - lowpass[ref][level].data).mean(axis=1) for wv in warped], axis=0)
        errors.append(err)
        if on_level_end is not None:
            on_level_end(level, depth_from_param(z).data, level_trace)
    with no_grad():
        final = float(loss_at(0, z)[0].item())
        depth = resize(depth_from_param(z), (h, w)).data
    return DepthResult(depth, trace, errors, initial, final, [tuple(s) for s in sizes])
