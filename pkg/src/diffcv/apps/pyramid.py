"""Coarse-to-fine schedules and image pyramids."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

from ..autodiff import OptimizerHyper, Tensor, resize
from ..filters import gaussian_blur

PYRAMID_SIGMA = 1.0


class NumericError(RuntimeError):
    """A solver produced a non-finite loss."""


@dataclass
class PyramidSchedule:
    levels: int = 6
    downscale: int = 2
    iters_per_level: int = 200
    optimizer: str = "adam"
    hyper: OptimizerHyper = field(default_factory=OptimizerHyper)

    def __post_init__(self):
        if self.levels < 1:
            raise ValueError("levels must be >= 1")
        if self.iters_per_level < 1:
            raise ValueError("iterations per level must be > 0")
        if self.downscale != 2:
            raise ValueError("only a downscale factor of 2 is supported")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hyper"]["betas"] = list(d["hyper"]["betas"])
        return d


def pyr_down(img: Tensor) -> Tensor:
    """Gaussian blur (sigma 1) then bilinear resize to half size (rounded up)."""
    h, w = img.shape[-2:]
    blurred = gaussian_blur(img, 5, PYRAMID_SIGMA)
    return resize(blurred, ((h + 1) // 2, (w + 1) // 2))


def build_pyramid(img: Tensor, levels: int) -> list[Tensor]:
    """Level 0 is the input; level i has roughly 1 / 2^i of its resolution."""
    out = [img]
    for _ in range(1, levels):
        if min(out[-1].shape[-2:]) < 2:
            break
        out.append(pyr_down(out[-1]))
    return out
