"""Central finite-difference checks for the autodiff engine."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor, grad, no_grad


def numerical_grad(fn: Callable[..., Tensor], inputs: Sequence[np.ndarray], h: float = 1e-6) -> list[np.ndarray]:
    """Central differences of the scalar ``fn(*tensors)`` w.r.t. every input entry."""
    arrays = [np.array(a, dtype=np.float64, copy=True) for a in inputs]
    out = []
    with no_grad():
        for k, a in enumerate(arrays):
            g = np.zeros_like(a)
            flat, gflat = a.reshape(-1), g.reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + h
                fp = float(fn(*[Tensor(x) for x in arrays]).data.sum())
                flat[i] = orig - h
                fm = float(fn(*[Tensor(x) for x in arrays]).data.sum())
                flat[i] = orig
                gflat[i] = (fp - fm) / (2 * h)
            out.append(g)
    return out


def analytic_grad(fn: Callable[..., Tensor], inputs: Sequence[np.ndarray]) -> list[np.ndarray]:
    tensors = [Tensor(np.array(a, dtype=np.float64, copy=True), requires_grad=True) for a in inputs]
    y = fn(*tensors)
    if y.size != 1:
        y = y.sum()
    return grad(y, tensors)


def max_rel_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """max |a - n| / max(1, |a|) over all entries."""
    denom = np.maximum(1.0, np.abs(analytic))
    return float(np.max(np.abs(analytic - numeric) / denom)) if analytic.size else 0.0


def gradcheck(fn: Callable[..., Tensor], inputs: Sequence[np.ndarray], h: float = 1e-6, rtol: float = 1e-4) -> float:
    """Raise ``AssertionError`` if analytic and numeric gradients disagree.

    Returns the worst relative error found.
    """
    a = analytic_grad(fn, inputs)
    n = numerical_grad(fn, inputs, h)
    worst = max((max_rel_error(x, y) for x, y in zip(a, n)), default=0.0)
    if worst >= rtol:
        raise AssertionError(f"gradient mismatch: relative error {worst:.3e} >= {rtol:.1e}")
    return worst
