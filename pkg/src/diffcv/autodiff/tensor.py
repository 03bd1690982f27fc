"""N-dimensional tensor with tape-based reverse-mode differentiation.

Every differentiable operation appends a node to a :class:`GradGraph`. Node ids
are handed out in insertion order, so sorting reachable nodes by decreasing id
is a valid reverse topological order. Nodes live on the tensors that produced
them; once a tensor is dropped its part of the tape is garbage collected.
"""

from __future__ import annotations

import itertools
import threading
from contextlib import contextmanager
from typing import Callable, Iterable, Sequence

import numpy as np

_local = threading.local()
_default_dtype = np.float64

BackwardFn = Callable[[np.ndarray], Sequence["np.ndarray | None"]]


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible."""


def set_default_dtype(dtype) -> None:
    global _default_dtype
    dtype = np.dtype(dtype)
    if dtype not in (np.float32, np.float64):
        raise ValueError(f"unsupported element type {dtype}")
    _default_dtype = dtype.type


def get_default_dtype():
    return _default_dtype


@contextmanager
def default_dtype(dtype):
    """Temporarily switch the element type of newly created tensors."""
    old = _default_dtype
    set_default_dtype(dtype)
    try:
        yield
    finally:
        set_default_dtype(old)


def is_grad_enabled() -> bool:
    return getattr(_local, "grad_enabled", True)


@contextmanager
def no_grad():
    """Disable graph recording inside the block."""
    old = is_grad_enabled()
    _local.grad_enabled = False
    try:
        yield
    finally:
        _local.grad_enabled = old


class Node:
    __slots__ = ("id", "parents", "backward_fn")

    def __init__(self, node_id: int, parents: tuple, backward_fn: BackwardFn | None):
        self.id = node_id
        self.parents = parents
        self.backward_fn = backward_fn

    @property
    def is_leaf(self) -> bool:
        return self.backward_fn is None


class GradGraph:
    """Append-only recording of operations.

    A graph is confined to one thread: recording and :meth:`backward` must not
    run concurrently on the same graph.
    """

    def __init__(self):
        self._ids = itertools.count()
        self.size = 0

    def record(self, parents: tuple, backward_fn: BackwardFn | None) -> Node:
        self.size += 1
        return Node(next(self._ids), parents, backward_fn)

    def backward(self, root: "Tensor", seed=None, accumulate: bool = True) -> dict:
        """Propagate gradients from ``root`` to every reachable leaf.

        Returns a map ``{leaf node id: gradient array}``. With ``accumulate``
        the gradients are also added into each leaf's ``.grad``.
        """
        if root._node is None:
            raise RuntimeError("root does not require grad")
        if seed is None:
            if root.data.size != 1:
                raise ShapeError("backward on a non-scalar root needs a seed gradient")
            seed = np.ones_like(root.data)
        else:
            seed = np.asarray(seed.data if isinstance(seed, Tensor) else seed, dtype=root.data.dtype)
            if seed.shape != root.shape:
                seed = np.broadcast_to(seed, root.shape).copy()

        # collect reachable nodes
        nodes: dict[int, tuple[Node, Tensor]] = {}
        stack = [root]
        while stack:
            t = stack.pop()
            node = t._node
            if node.id in nodes:
                continue
            nodes[node.id] = (node, t)
            for p in node.parents:
                if p._node is not None and p._node.id not in nodes:
                    stack.append(p)

        grads: dict[int, np.ndarray] = {root._node.id: seed}
        leaf_grads: dict[int, np.ndarray] = {}
        for nid in sorted(nodes, reverse=True):
            node, tensor = nodes[nid]
            g = grads.pop(nid, None)
            if g is None:
                continue
            if node.backward_fn is None:
                leaf_grads[nid] = g
                if accumulate:
                    tensor.grad = g.copy() if tensor.grad is None else tensor.grad + g
                continue
            parent_grads = node.backward_fn(g)
            for p, pg in zip(node.parents, parent_grads):
                if pg is None or p._node is None:
                    continue
                pid = p._node.id
                if pid in grads:
                    grads[pid] = grads[pid] + pg
                else:
                    grads[pid] = pg
        return leaf_grads


def current_graph() -> GradGraph:
    g = getattr(_local, "graph", None)
    if g is None:
        g = _local.graph = GradGraph()
    return g


def backward(root: "Tensor", seed=None) -> dict:
    """Run reverse-mode differentiation from ``root`` on the current graph."""
    return current_graph().backward(root, seed)


def grad(root: "Tensor", inputs: Sequence["Tensor"], seed=None) -> list[np.ndarray]:
    """Gradients of ``root`` w.r.t. ``inputs`` without touching ``.grad``.

    Inputs that do not influence ``root`` get zeros of their own shape.
    """
    got = current_graph().backward(root, seed, accumulate=False)
    out = []
    for t in inputs:
        if t._node is not None and t._node.id in got:
            out.append(got[t._node.id])
        else:
            out.append(np.zeros_like(t.data))
    return out


def _as_array(x, dtype=None) -> np.ndarray:
    if isinstance(x, np.ndarray) and x.dtype in (np.float32, np.float64) and dtype is None:
        return x
    return np.asarray(x, dtype=dtype or _default_dtype)


def unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``g`` down to ``shape`` (inverse of trailing-axis broadcasting)."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def broadcast_shape(*shapes) -> tuple:
    try:
        return np.broadcast_shapes(*shapes)
    except ValueError as e:
        raise ShapeError(f"shapes {shapes} are not broadcastable") from e


def _is_basic_index(idx) -> bool:
    if not isinstance(idx, tuple):
        idx = (idx,)
    return all(isinstance(i, (slice, int, np.integer)) or i is None or i is Ellipsis for i in idx)


class Tensor:
    """Numeric array that optionally records the operations applied to it."""

    __array_priority__ = 1000
    __slots__ = ("data", "requires_grad", "grad", "_node", "__weakref__")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        if isinstance(data, Tensor):
            data = data.data
        self.data = _as_array(data, dtype)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._node = current_graph().record((), None) if requires_grad else None

    # -- construction helpers -------------------------------------------------

    @staticmethod
    def _make(data: np.ndarray, parents: tuple, backward_fn: BackwardFn) -> "Tensor":
        out = Tensor.__new__(Tensor)
        out.data = data
        out.grad = None
        needs = is_grad_enabled() and any(p.requires_grad for p in parents)
        out.requires_grad = needs
        out._node = current_graph().record(parents, backward_fn) if needs else None
        return out

    def _wrap(self, other) -> "Tensor":
        if isinstance(other, Tensor):
            return other
        return Tensor(np.asarray(other, dtype=self.data.dtype))

    # -- basic properties -----------------------------------------------------

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def node_id(self) -> int | None:
        return None if self._node is None else self._node.id

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def astype(self, dtype) -> "Tensor":
        dtype = np.dtype(dtype)
        src = self.data.dtype
        return Tensor._make(self.data.astype(dtype), (self,), lambda g: (g.astype(src),))

    def __len__(self) -> int:
        return self.data.shape[0]

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor({self.data!r}{flag})"

    def backward(self, seed=None) -> dict:
        return backward(self, seed)

    def zero_grad(self) -> None:
        self.grad = None

    # -- arithmetic -----------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, p):
        return pow(self, p)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __abs__(self):
        return abs_(self)

    def __getitem__(self, idx):
        return getitem(self, idx)

    # -- method aliases -------------------------------------------------------

    def exp(self):
        return exp(self)

    def log(self):
        return log(self)

    def sqrt(self):
        return sqrt(self)

    def abs(self):
        return abs_(self)

    def sin(self):
        return sin(self)

    def cos(self):
        return cos(self)

    def clamp(self, min=None, max=None):
        return clamp(self, min, max)

    def sum(self, axis=None, keepdims=False):
        return reduce_sum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return reduce_mean(self, axis, keepdims)

    def max(self, axis=None, keepdims=False):
        return reduce_max(self, axis, keepdims)

    def min(self, axis=None, keepdims=False):
        return reduce_min(self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def permute(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return permute(self, axes)

    def transpose(self, a: int = -2, b: int = -1):
        axes = list(range(self.ndim))
        axes[a], axes[b] = axes[b], axes[a]
        return permute(self, tuple(axes))

    def expand(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return broadcast_to(self, shape)

    def unsqueeze(self, axis: int):
        axis = axis if axis >= 0 else self.ndim + 1 + axis
        return reshape(self, self.shape[:axis] + (1,) + self.shape[axis:])

    def squeeze(self, axis: int):
        if self.shape[axis] != 1:
            raise ShapeError(f"axis {axis} has extent {self.shape[axis]}, not 1")
        shape = list(self.shape)
        del shape[axis]
        return reshape(self, tuple(shape))


def tensor(data, requires_grad: bool = False, dtype=None) -> Tensor:
    return Tensor(data, requires_grad=requires_grad, dtype=dtype)


def zeros(shape, requires_grad=False, dtype=None) -> Tensor:
    return Tensor(np.zeros(shape, dtype=dtype or _default_dtype), requires_grad)


def ones(shape, requires_grad=False, dtype=None) -> Tensor:
    return Tensor(np.ones(shape, dtype=dtype or _default_dtype), requires_grad)


def _pair(a, b) -> tuple[Tensor, Tensor]:
    if isinstance(a, Tensor):
        return a, a._wrap(b)
    if isinstance(b, Tensor):
        return b._wrap(a), b
    return Tensor(a), Tensor(b)


# -- elementwise ----------------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = _pair(a, b)
    broadcast_shape(a.shape, b.shape)
    sa, sb = a.shape, b.shape
    return Tensor._make(a.data + b.data, (a, b), lambda g: (unbroadcast(g, sa), unbroadcast(g, sb)))


def sub(a, b) -> Tensor:
    a, b = _pair(a, b)
    broadcast_shape(a.shape, b.shape)
    sa, sb = a.shape, b.shape
    return Tensor._make(a.data - b.data, (a, b), lambda g: (unbroadcast(g, sa), unbroadcast(-g, sb)))


def mul(a, b) -> Tensor:
    a, b = _pair(a, b)
    broadcast_shape(a.shape, b.shape)
    ad, bd = a.data, b.data

    def bw(g):
        return (
            unbroadcast(g * bd, ad.shape) if a.requires_grad else None,
            unbroadcast(g * ad, bd.shape) if b.requires_grad else None,
        )

    return Tensor._make(ad * bd, (a, b), bw)


def div(a, b) -> Tensor:
    a, b = _pair(a, b)
    broadcast_shape(a.shape, b.shape)
    ad, bd = a.data, b.data
    with np.errstate(divide="ignore", invalid="ignore"):
        out = ad / bd

    def bw(g):
        with np.errstate(divide="ignore", invalid="ignore"):
            ga = unbroadcast(g / bd, ad.shape) if a.requires_grad else None
            gb = unbroadcast(-g * out / bd, bd.shape) if b.requires_grad else None
        return ga, gb

    return Tensor._make(out, (a, b), bw)


def neg(a: Tensor) -> Tensor:
    return Tensor._make(-a.data, (a,), lambda g: (-g,))


def abs_(a: Tensor) -> Tensor:
    s = np.sign(a.data)
    return Tensor._make(np.abs(a.data), (a,), lambda g: (g * s,))


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)
    return Tensor._make(out, (a,), lambda g: (g * out,))


def log(a: Tensor) -> Tensor:
    ad = a.data
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(ad)

    def bw(g):
        with np.errstate(divide="ignore", invalid="ignore"):
            return (g / ad,)

    return Tensor._make(out, (a,), bw)


def sqrt(a: Tensor) -> Tensor:
    with np.errstate(invalid="ignore"):
        out = np.sqrt(a.data)

    def bw(g):
        with np.errstate(divide="ignore", invalid="ignore"):
            return (g * 0.5 / out,)

    return Tensor._make(out, (a,), bw)


def pow(a, p) -> Tensor:
    """``a ** p``; ``p`` may be a scalar or a tensor."""
    if isinstance(p, Tensor):
        a, p = _pair(a, p)
        ad, pd = a.data, p.data
        with np.errstate(divide="ignore", invalid="ignore"):
            out = ad**pd

        def bw(g):
            with np.errstate(divide="ignore", invalid="ignore"):
                ga = unbroadcast(g * pd * ad ** (pd - 1), ad.shape) if a.requires_grad else None
                gp = unbroadcast(g * out * np.log(ad), pd.shape) if p.requires_grad else None
            return ga, gp

        return Tensor._make(out, (a, p), bw)
    if not isinstance(a, Tensor):
        a = Tensor(a)
    ad = a.data
    p = float(p)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = ad**p

    def bw(g):
        if p == 2.0:
            return (g * 2.0 * ad,)
        with np.errstate(divide="ignore", invalid="ignore"):
            return (g * p * ad ** (p - 1),)

    return Tensor._make(out, (a,), bw)


def square(a: Tensor) -> Tensor:
    return mul(a, a)


def sin(a: Tensor) -> Tensor:
    ad = a.data
    return Tensor._make(np.sin(ad), (a,), lambda g: (g * np.cos(ad),))


def cos(a: Tensor) -> Tensor:
    ad = a.data
    return Tensor._make(np.cos(ad), (a,), lambda g: (-g * np.sin(ad),))


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)
    return Tensor._make(out, (a,), lambda g: (g * (1.0 - out * out),))


def sigmoid(a: Tensor) -> Tensor:
    out = 0.5 * (1.0 + np.tanh(0.5 * a.data))
    return Tensor._make(out, (a,), lambda g: (g * out * (1.0 - out),))


def softplus(a: Tensor) -> Tensor:
    ad = a.data
    out = np.logaddexp(0.0, ad).astype(ad.dtype, copy=False)

    def bw(g):
        s = np.exp(-np.logaddexp(0.0, -ad)).astype(ad.dtype, copy=False)
        return (g * s,)

    return Tensor._make(out, (a,), bw)


def atan2(y, x) -> Tensor:
    y, x = _pair(y, x)
    yd, xd = y.data, x.data
    out = np.arctan2(yd, xd)

    def bw(g):
        r2 = xd * xd + yd * yd
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(r2 > 0, g / np.where(r2 > 0, r2, 1.0), 0.0)
        gy = unbroadcast(scale * xd, yd.shape) if y.requires_grad else None
        gx = unbroadcast(-scale * yd, xd.shape) if x.requires_grad else None
        return gy, gx

    return Tensor._make(out, (y, x), bw)


def clamp(a: Tensor, min=None, max=None) -> Tensor:
    """Clip to ``[min, max]``; the gradient passes inside and on the boundary."""
    ad = a.data
    out = np.clip(ad, min, max) if (min is not None or max is not None) else ad.copy()
    keep = np.ones(ad.shape, dtype=bool)
    if min is not None:
        keep &= ad >= min
    if max is not None:
        keep &= ad <= max
    return Tensor._make(out.astype(ad.dtype, copy=False), (a,), lambda g: (g * keep,))


def maximum(a, b) -> Tensor:
    """Elementwise maximum; ties route the gradient to ``a``."""
    a, b = _pair(a, b)
    pick_a = a.data >= b.data
    out = np.where(pick_a, a.data, b.data)
    sa, sb = a.shape, b.shape
    return Tensor._make(out, (a, b), lambda g: (unbroadcast(g * pick_a, sa), unbroadcast(g * ~pick_a, sb)))


def minimum(a, b) -> Tensor:
    """Elementwise minimum; ties route the gradient to ``a``."""
    a, b = _pair(a, b)
    pick_a = a.data <= b.data
    out = np.where(pick_a, a.data, b.data)
    sa, sb = a.shape, b.shape
    return Tensor._make(out, (a, b), lambda g: (unbroadcast(g * pick_a, sa), unbroadcast(g * ~pick_a, sb)))


def where(cond, a, b) -> Tensor:
    cond = np.asarray(cond.data if isinstance(cond, Tensor) else cond, dtype=bool)
    a, b = _pair(a, b)
    out = np.where(cond, a.data, b.data)
    sa, sb = a.shape, b.shape
    return Tensor._make(
        out, (a, b), lambda g: (unbroadcast(np.where(cond, g, 0.0), sa), unbroadcast(np.where(cond, 0.0, g), sb))
    )


# -- reductions -----------------------------------------------------------------


def _norm_axes(axis, ndim: int) -> tuple:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, (int, np.integer)):
        axis = (axis,)
    out = []
    for ax in axis:
        if not -ndim <= ax < ndim:
            raise ShapeError(f"axis {ax} out of range for {ndim}-d tensor")
        out.append(ax % ndim)
    if len(set(out)) != len(out):
        raise ShapeError(f"repeated axes {axis}")
    return tuple(sorted(out))


def _expand_reduced(g: np.ndarray, shape: tuple, axes: tuple, keepdims: bool) -> np.ndarray:
    if not keepdims:
        g = np.expand_dims(g, axes)
    return np.broadcast_to(g, shape)


def reduce_sum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    axes = _norm_axes(axis, a.ndim)
    shape = a.shape
    out = a.data.sum(axis=axes, keepdims=keepdims)
    return Tensor._make(np.asarray(out), (a,), lambda g: (_expand_reduced(g, shape, axes, keepdims),))


def reduce_mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    axes = _norm_axes(axis, a.ndim)
    shape = a.shape
    n = int(np.prod([shape[i] for i in axes])) if axes else 1
    out = a.data.mean(axis=axes, keepdims=keepdims)
    return Tensor._make(np.asarray(out), (a,), lambda g: (_expand_reduced(g / n, shape, axes, keepdims),))


def _reduce_arg(a: Tensor, axis, keepdims: bool, use_max: bool) -> Tensor:
    axes = _norm_axes(axis, a.ndim)
    keep = [i for i in range(a.ndim) if i not in axes]
    perm = keep + list(axes)
    moved = np.transpose(a.data, perm)
    kshape = moved.shape[: len(keep)]
    flat = moved.reshape(kshape + (-1,))
    idx = np.argmax(flat, axis=-1) if use_max else np.argmin(flat, axis=-1)
    out = np.take_along_axis(flat, idx[..., None], axis=-1)[..., 0]
    if keepdims:
        out = out.reshape([1 if i in axes else n for i, n in enumerate(a.shape)])
    inv = np.argsort(perm)
    shape = a.shape

    def bw(g):
        gflat = np.zeros(flat.shape, dtype=g.dtype)
        np.put_along_axis(gflat, idx[..., None], g.reshape(kshape + (1,)), axis=-1)
        return (np.transpose(gflat.reshape(moved.shape), inv).reshape(shape),)

    return Tensor._make(np.asarray(out), (a,), bw)


def reduce_max(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    """Maximum over ``axis``; the gradient goes to the first maximal element."""
    return _reduce_arg(a, axis, keepdims, True)


def reduce_min(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    """Minimum over ``axis``; the gradient goes to the first minimal element."""
    return _reduce_arg(a, axis, keepdims, False)


def reduce(op: str, a: Tensor, axes=None, keepdims: bool = False) -> Tensor:
    fns = {"sum": reduce_sum, "mean": reduce_mean, "max": reduce_max, "min": reduce_min}
    if op not in fns:
        raise ValueError(f"unknown reduction {op!r}")
    return fns[op](a, axes, keepdims)


def elementwise(op: str, a, b=None) -> Tensor:
    """Dispatch by name; ``b`` is the second operand or the exponent/bounds."""
    binary = {"add": add, "sub": sub, "mul": mul, "div": div, "pow": pow}
    unary = {"neg": neg, "abs": abs_, "exp": exp, "log": log}
    if op in binary:
        return binary[op](a, b)
    if op in unary:
        return unary[op](a if isinstance(a, Tensor) else Tensor(a))
    if op == "clamp":
        lo, hi = b
        return clamp(a, lo, hi)
    raise ValueError(f"unknown elementwise op {op!r}")


def logsumexp(a: Tensor, axis: int = -1, keepdims: bool = False) -> Tensor:
    m = np.max(a.data, axis=axis, keepdims=True)
    shifted = a - Tensor(m)
    out = log(reduce_sum(exp(shifted), axis, keepdims=True)) + Tensor(m)
    return out if keepdims else out.squeeze(axis)


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    m = np.max(a.data, axis=axis, keepdims=True)
    e = exp(a - Tensor(m))
    return e / reduce_sum(e, axis, keepdims=True)


# -- linear algebra -----------------------------------------------------------------


def matmul(a, b) -> Tensor:
    a, b = _pair(a, b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError("matmul needs operands with at least 2 axes")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"inner extents differ: {a.shape} @ {b.shape}")
    broadcast_shape(a.shape[:-2], b.shape[:-2])
    ad, bd = a.data, b.data

    def bw(g):
        ga = unbroadcast(g @ np.swapaxes(bd, -1, -2), ad.shape) if a.requires_grad else None
        gb = unbroadcast(np.swapaxes(ad, -1, -2) @ g, bd.shape) if b.requires_grad else None
        return ga, gb

    return Tensor._make(ad @ bd, (a, b), bw)


def inverse(a: Tensor) -> Tensor:
    """Batched matrix inverse; d(A^-1) = -A^-1 dA A^-1."""
    inv = np.linalg.inv(a.data)

    def bw(g):
        invt = np.swapaxes(inv, -1, -2)
        return (-(invt @ g @ invt),)

    return Tensor._make(inv, (a,), bw)


# -- shape manipulation ---------------------------------------------------------------


def reshape(a: Tensor, shape) -> Tensor:
    src = a.shape
    return Tensor._make(a.data.reshape(shape), (a,), lambda g: (g.reshape(src),))


def permute(a: Tensor, axes) -> Tensor:
    inv = np.argsort(axes)
    return Tensor._make(np.transpose(a.data, axes), (a,), lambda g: (np.transpose(g, inv),))


def broadcast_to(a: Tensor, shape) -> Tensor:
    src = a.shape
    shape = broadcast_shape(src, tuple(shape))
    return Tensor._make(np.broadcast_to(a.data, shape), (a,), lambda g: (unbroadcast(g, src),))


def getitem(a: Tensor, idx) -> Tensor:
    if isinstance(idx, Tensor):
        idx = idx.data
    if isinstance(idx, tuple):
        idx = tuple(i.data if isinstance(i, Tensor) else i for i in idx)
    shape, dtype = a.shape, a.dtype
    basic = _is_basic_index(idx)
    out = a.data[idx]
    if basic:
        out = out.copy()

    def bw(g):
        full = np.zeros(shape, dtype=g.dtype if g.dtype == dtype else dtype)
        if basic:
            full[idx] = g
        else:
            np.add.at(full, idx, g)
        return (full,)

    return Tensor._make(out, (a,), bw)


def take(a: Tensor, indices: np.ndarray, axis: int) -> Tensor:
    """Gather along one axis with integer ``indices``; repeats accumulate."""
    indices = np.asarray(indices)
    axis = axis % a.ndim
    shape = a.shape
    out = np.take(a.data, indices, axis=axis)

    def bw(g):
        moved = np.moveaxis(g, list(range(axis, axis + indices.ndim)), list(range(indices.ndim)))
        moved = moved.reshape((indices.size,) + moved.shape[indices.ndim :])
        rest = shape[:axis] + shape[axis + 1 :]
        acc = np.zeros((shape[axis],) + rest, dtype=g.dtype)
        np.add.at(acc, indices.reshape(-1), moved)
        return (np.moveaxis(acc, 0, axis),)

    return Tensor._make(out, (a,), bw)


def cat(tensors: Sequence, axis: int = 0) -> Tensor:
    tensors = [t if isinstance(t, Tensor) else Tensor(t) for t in tensors]
    axis = axis % tensors[0].ndim
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum([0] + sizes)
    out = np.concatenate([t.data for t in tensors], axis=axis)

    def bw(g):
        res = []
        for lo, hi in zip(bounds[:-1], bounds[1:]):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(lo, hi)
            res.append(g[tuple(sl)])
        return res

    return Tensor._make(out, tuple(tensors), bw)


def stack(tensors: Sequence, axis: int = 0) -> Tensor:
    tensors = [t if isinstance(t, Tensor) else Tensor(t) for t in tensors]
    ndim = tensors[0].ndim + 1
    axis = axis % ndim
    return cat([t.unsqueeze(axis) for t in tensors], axis=axis)


def as_tensor(x, dtype=None) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x, dtype=dtype)


def concat_all(parts: Iterable) -> Tensor:
    """Flatten and concatenate, handy for packing parameters."""
    return cat([as_tensor(p).reshape(-1) for p in parts], axis=0)
