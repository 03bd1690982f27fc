"""First-order optimizers operating on leaf tensors."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .tensor import ShapeError, Tensor


@dataclass
class OptimizerHyper:
    lr: float = 1e-3
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    momentum: float = 0.9


class Optimizer:
    def __init__(self, params: Sequence[Tensor], hyper: OptimizerHyper):
        self.params = list(params)
        self.hyper = hyper
        self.state: list[dict] = [{} for _ in self.params]

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self, grads: Sequence[np.ndarray | None] | None = None) -> None:
        """Update parameters in place; ``grads`` defaults to each ``p.grad``."""
        if grads is None:
            grads = [p.grad for p in self.params]
        for p, g, st in zip(self.params, grads, self.state):
            if g is None:
                continue
            if g.shape != p.shape:
                raise ShapeError(f"gradient shape {g.shape} does not match parameter {p.shape}")
            # replace rather than mutate: old graphs keep their forward values
            p.data = self._update(p.data, np.asarray(g, dtype=p.dtype), st).astype(p.dtype, copy=False)

    def _update(self, x: np.ndarray, g: np.ndarray, st: dict) -> np.ndarray:
        raise NotImplementedError


class Adam(Optimizer):
    """Adam with bias-corrected first and second moment estimates."""

    def __init__(self, params, lr=1e-3, betas=(0.9, 0.999), eps=1e-8):
        super().__init__(params, OptimizerHyper(lr=lr, betas=betas, eps=eps))

    def _update(self, x, g, st):
        b1, b2 = self.hyper.betas
        if not st:
            st["t"] = 0
            st["m"] = np.zeros_like(x)
            st["v"] = np.zeros_like(x)
        st["t"] += 1
        t = st["t"]
        st["m"] = b1 * st["m"] + (1 - b1) * g
        st["v"] = b2 * st["v"] + (1 - b2) * g * g
        m_hat = st["m"] / (1 - b1**t)
        v_hat = st["v"] / (1 - b2**t)
        return x - self.hyper.lr * m_hat / (np.sqrt(v_hat) + self.hyper.eps)


class SGDMomentum(Optimizer):
    """Heavy-ball SGD: ``v <- mu v + g``, ``x <- x - lr v``."""

    def __init__(self, params, lr=1e-2, momentum=0.9):
        super().__init__(params, OptimizerHyper(lr=lr, momentum=momentum))

    def _update(self, x, g, st):
        if not st:
            st["v"] = np.zeros_like(x)
        st["v"] = self.hyper.momentum * st["v"] + g
        return x - self.hyper.lr * st["v"]


def make_optimizer(kind: str, params, hyper: OptimizerHyper | None = None) -> Optimizer:
    hyper = hyper or OptimizerHyper()
    if kind == "adam":
        return Adam(params, lr=hyper.lr, betas=hyper.betas, eps=hyper.eps)
    if kind in ("sgd_momentum", "sgd"):
        return SGDMomentum(params, lr=hyper.lr, momentum=hyper.momentum)
    raise ValueError(f"unknown optimizer {kind!r}")


def optimizer_step(kind: str, params, grads, state, hyper: OptimizerHyper):
    """Functional form: returns (new parameter arrays, new state).

    ``state`` is a list of per-parameter dicts (empty dicts on the first call).
    """
    arrays = [np.array(p.data if isinstance(p, Tensor) else p, copy=True) for p in params]
    opt = make_optimizer(kind, [Tensor(a) for a in arrays], hyper)
    opt.state = [dict(s) for s in state] if state else opt.state
    opt.step([np.asarray(g) for g in grads])
    return [p.data for p in opt.params], opt.state
