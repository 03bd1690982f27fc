"""Direct homography registration by gradient descent on the photometric error."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..autodiff import Tensor, make_optimizer, no_grad
from ..autodiff.tensor import cat
from ..geometry import homography_warp
from ..losses import l1_photometric
from .pyramid import NumericError, PyramidSchedule, build_pyramid

_IDENTITY_OFFSET = np.array([1.0, 0, 0, 0, 1.0, 0, 0, 0])


def params_to_homography(p: Tensor) -> Tensor:
    """8 free entries (row-major, bottom-right fixed to 1), stored as offsets from identity."""
    full = p + _IDENTITY_OFFSET.astype(p.dtype)
    return cat([full, Tensor(np.ones(1, dtype=p.dtype))]).reshape(3, 3)


@dataclass
class RegistrationResult:
    H: np.ndarray  # normalized coordinates, maps dst pixels to src
    losses: list[list[float]]  # per level, coarse to fine
    warped: list[np.ndarray]  # final warped source per level, coarse to fine
    initial_loss: float
    final_loss: float


def register(src: Tensor, dst: Tensor, schedule: PyramidSchedule | None = None, H0=None) -> RegistrationResult:
    """Find H minimizing mean |warp(src, H) - dst| over the valid overlap.

    Coordinates are normalized to [-1, 1], so one set of parameters is shared
    by all pyramid levels; levels run from coarse to fine.
    """
    schedule = schedule or PyramidSchedule()
    if src.shape != dst.shape:
        raise ValueError(f"source {src.shape} and destination {dst.shape} differ")
    src_pyr = build_pyramid(src, schedule.levels)
    dst_pyr = build_pyramid(dst, schedule.levels)
    dtype = src.dtype
    init = np.zeros(8) if H0 is None else (np.asarray(H0, float) / H0[2][2]).reshape(-1)[:8] - _IDENTITY_OFFSET
    p = Tensor(init.astype(dtype), requires_grad=True)
    opt = make_optimizer(schedule.optimizer, [p], schedule.hyper)

    def loss_at(level: int) -> Tensor:
        warped, mask = homography_warp(src_pyr[level], params_to_homography(p))
        return l1_photometric(warped, dst_pyr[level], mask), warped

    with no_grad():
        initial = float(loss_at(0)[0].item())
    trace, warped_levels = [], []
    for level in reversed(range(len(src_pyr))):
        level_trace = []
        for _ in range(schedule.iters_per_level):
            p.grad = None
            loss, _ = loss_at(level)
            value = loss.item()
            if not np.isfinite(value):
                raise NumericError(f"non-finite registration loss at level {level}")
            loss.backward()
            opt.step()
            if not np.isfinite(p.data).all():
                raise NumericError(f"homography diverged at level {level}")
            level_trace.append(value)
        with no_grad():
            warped_levels.append(loss_at(level)[1].data)
        trace.append(level_trace)
    with no_grad():
        final = float(loss_at(0)[0].item())
    H = params_to_homography(p.detach()).data.astype(np.float64)
    return RegistrationResult(H, trace, warped_levels, initial, final)
