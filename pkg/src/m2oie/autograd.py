"""Dense tensors with reverse-mode automatic differentiation.

Every tensor wraps a numpy array and records the operation that produced
it as a backward closure.  Calling :meth:`Tensor.backward` on a scalar
walks the recorded graph in reverse topological order and accumulates
gradients into every tensor created with ``requires_grad=True``.

Storage is row-major and dense.  The default element type is float32;
gradient checking switches the whole module to float64 via
:func:`using_dtype`.
"""

from __future__ import annotations

import contextlib
import math
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "ShapeError",
    "Tensor",
    "add",
    "concat_cols",
    "constant",
    "cross_entropy",
    "default_dtype",
    "dropout",
    "gather_rows",
    "grad_check",
    "layer_norm",
    "matmul",
    "mean_rows",
    "mul",
    "multi_head_attention",
    "relu",
    "repeat_rows",
    "scale",
    "set_default_dtype",
    "slice_cols",
    "softmax_rows",
    "sum_all",
    "tensor",
    "transpose",
    "using_dtype",
]


class ShapeError(ValueError):
    """Operand shapes are incompatible for the requested operation."""


_DEFAULT_DTYPE = np.float32


def default_dtype() -> np.dtype:
    return np.dtype(_DEFAULT_DTYPE)


def set_default_dtype(dtype) -> None:
    """Set the element type used for newly created tensors."""
    global _DEFAULT_DTYPE
    dtype = np.dtype(dtype)
    if dtype not in (np.dtype(np.float32), np.dtype(np.float64)):
        raise ValueError(f"unsupported dtype {dtype}; use float32 or float64")
    _DEFAULT_DTYPE = dtype.type


@contextlib.contextmanager
def using_dtype(dtype):
    """Temporarily switch the default element type (e.g. for grad checks)."""
    previous = _DEFAULT_DTYPE
    set_default_dtype(dtype)
    try:
        yield
    finally:
        set_default_dtype(previous)


class Tensor:
    """A dense array plus the bookkeeping needed for backpropagation.

    Tensors are treated as immutable once they participate in a forward
    pass; optimizers mutate ``data`` in place only between passes.
    """

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, _parents: tuple = (),
                 _backward: Callable[[np.ndarray], None] | None = None):
        self.data = np.asarray(data, dtype=_DEFAULT_DTYPE)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def accumulate_grad(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = g.astype(self.data.dtype, copy=True)
        else:
            self.grad += g

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        """Backpropagate from this scalar through the recorded graph."""
        if self.data.size != 1:
            raise ValueError(f"backward requires a scalar output, got shape {self.shape}")
        for node in reversed(_topo_order(self)):
            if node is self:
                node.accumulate_grad(np.ones_like(node.data))
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


def _topo_order(root: Tensor) -> list[Tensor]:
    # Iterative post-order DFS; recursion would overflow on deep graphs.
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


def tensor(data, requires_grad: bool = False) -> Tensor:
    return Tensor(data, requires_grad=requires_grad)


def constant(data) -> Tensor:
    """A tensor that never receives gradients (masks, fixed biases)."""
    return Tensor(data, requires_grad=False)


def _result(data: np.ndarray, parents: Iterable[Tensor],
            backward: Callable[[np.ndarray], None]) -> Tensor:
    parents = tuple(parents)
    if any(p.requires_grad or p._parents for p in parents):
        return Tensor(data, requires_grad=True, _parents=parents, _backward=backward)
    return Tensor(data)


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum; ``b`` may be a 1-D bias broadcast over rows of ``a``."""
    if a.shape != b.shape and not (a.ndim == 2 and b.ndim == 1 and a.shape[1] == b.shape[0]):
        raise ShapeError(f"add: incompatible shapes {a.shape} and {b.shape}")
    out_data = a.data + b.data

    def backward(g):
        if a.requires_grad or a._parents:
            a.accumulate_grad(g)
        if b.requires_grad or b._parents:
            b.accumulate_grad(g.sum(axis=0) if b.shape != a.shape else g)

    return _result(out_data, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"mul: incompatible shapes {a.shape} and {b.shape}")
    out_data = a.data * b.data

    def backward(g):
        if a.requires_grad or a._parents:
            a.accumulate_grad(g * b.data)
        if b.requires_grad or b._parents:
            b.accumulate_grad(g * a.data)

    return _result(out_data, (a, b), backward)


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)

    def backward(g):
        a.accumulate_grad(g * c)

    return _result(a.data * c, (a,), backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product of two rank-2 tensors."""
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul: operands must be rank 2, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dimensions differ, {a.shape} vs {b.shape}")
    out_data = a.data @ b.data

    def backward(g):
        if a.requires_grad or a._parents:
            a.accumulate_grad(g @ b.data.T)
        if b.requires_grad or b._parents:
            b.accumulate_grad(a.data.T @ g)

    return _result(out_data, (a, b), backward)


def transpose(a: Tensor) -> Tensor:
    if a.ndim != 2:
        raise ShapeError(f"transpose: expected rank 2, got {a.shape}")

    def backward(g):
        a.accumulate_grad(g.T)

    return _result(a.data.T.copy(), (a,), backward)


def relu(a: Tensor) -> Tensor:
    keep = a.data > 0

    def backward(g):
        a.accumulate_grad(g * keep)

    return _result(np.where(keep, a.data, 0.0), (a,), backward)


def softmax_rows(x: Tensor) -> Tensor:
    """Row-wise softmax with max-subtraction for numerical stability."""
    if x.ndim != 2:
        raise ShapeError(f"softmax_rows: expected rank 2, got {x.shape}")
    if np.isnan(x.data).any():
        raise ValueError("softmax_rows: input contains NaN")
    shifted = x.data - x.data.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    probs = exp / exp.sum(axis=1, keepdims=True)

    def backward(g):
        dot = (g * probs).sum(axis=1, keepdims=True)
        x.accumulate_grad(probs * (g - dot))

    return _result(probs, (x,), backward)


def multi_head_attention(q: Tensor, k: Tensor, v: Tensor, num_heads: int,
                         penalty: np.ndarray | None = None,
                         return_weights: bool = False):
    """Scaled dot-product attention over column-partitioned heads.

    ``q`` is (l, d) and ``k``/``v`` are (p, d) with ``d`` divisible by
    ``num_heads``; head ``h`` reads columns ``[h*d/H, (h+1)*d/H)``.  An
    optional additive ``penalty`` of shape (l, p) is applied to the
    scores of every head before the softmax (attention masking).  With
    ``return_weights`` the (num_heads, l, p) softmax weights come back
    alongside the output.
    """
    l, d = q.shape
    p = k.shape[0]
    if d % num_heads != 0:
        raise ShapeError(f"width {d} not divisible by {num_heads} heads")
    if k.shape != v.shape or k.shape[1] != d:
        raise ShapeError(f"q {q.shape}, k {k.shape}, v {v.shape} inconsistent")
    head_dim = d // num_heads
    inv_scale = 1.0 / math.sqrt(head_dim)

    def split(t: np.ndarray) -> np.ndarray:
        return t.reshape(t.shape[0], num_heads, head_dim).transpose(1, 0, 2)

    qh, kh, vh = split(q.data), split(k.data), split(v.data)
    scores = (qh @ kh.transpose(0, 2, 1)) * inv_scale
    if penalty is not None:
        scores = scores + penalty
    scores -= scores.max(axis=2, keepdims=True)
    exp = np.exp(scores)
    attn = exp / exp.sum(axis=2, keepdims=True)
    out = (attn @ vh).transpose(1, 0, 2).reshape(l, d)

    def backward(g):
        gz = g.reshape(l, num_heads, head_dim).transpose(1, 0, 2)
        if v.requires_grad or v._parents:
            v.accumulate_grad((attn.transpose(0, 2, 1) @ gz)
                              .transpose(1, 0, 2).reshape(p, d))
        d_attn = gz @ vh.transpose(0, 2, 1)
        d_scores = attn * (d_attn - (d_attn * attn).sum(axis=2, keepdims=True))
        d_scores *= inv_scale
        if q.requires_grad or q._parents:
            q.accumulate_grad((d_scores @ kh).transpose(1, 0, 2).reshape(l, d))
        if k.requires_grad or k._parents:
            k.accumulate_grad((d_scores.transpose(0, 2, 1) @ qh)
                              .transpose(1, 0, 2).reshape(p, d))

    result = _result(out, (q, k, v), backward)
    if return_weights:
        return result, attn
    return result


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize each row to zero mean / unit variance, then scale and shift."""
    if eps <= 0:
        raise ValueError("layer_norm: eps must be positive")
    if x.ndim != 2 or gain.shape != (x.shape[1],) or bias.shape != (x.shape[1],):
        raise ShapeError(
            f"layer_norm: got x {x.shape}, gain {gain.shape}, bias {bias.shape}")
    n = x.shape[1]
    mean = x.data.mean(axis=1, keepdims=True)
    centered = x.data - mean
    var = (centered ** 2).mean(axis=1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    normed = centered * inv_std
    out_data = normed * gain.data + bias.data

    def backward(g):
        if gain.requires_grad:
            gain.accumulate_grad((g * normed).sum(axis=0))
        if bias.requires_grad:
            bias.accumulate_grad(g.sum(axis=0))
        if x.requires_grad or x._parents:
            dnormed = g * gain.data
            term = n * dnormed - dnormed.sum(axis=1, keepdims=True) \
                - normed * (dnormed * normed).sum(axis=1, keepdims=True)
            x.accumulate_grad(inv_std / n * term)

    return _result(out_data, (x, gain, bias), backward)


def cross_entropy(logits: Tensor, targets: Sequence[int],
                  mask: Sequence[bool]) -> Tensor:
    """Mean negative log-softmax probability of the target class.

    Only positions where ``mask`` is true contribute; target entries at
    masked positions are ignored.  Raises if the mask selects nothing.
    """
    if logits.ndim != 2:
        raise ShapeError(f"cross_entropy: expected rank-2 logits, got {logits.shape}")
    l, c = logits.shape
    targets = np.asarray(targets, dtype=np.int64)
    keep = np.asarray(mask, dtype=bool)
    if targets.shape != (l,) or keep.shape != (l,):
        raise ShapeError(
            f"cross_entropy: logits rows {l}, targets {targets.shape}, mask {keep.shape}")
    if not keep.any():
        raise ValueError("cross_entropy: mask selects no positions")
    active = targets[keep]
    if active.min() < 0 or active.max() >= c:
        raise ValueError(f"cross_entropy: target index outside [0, {c})")

    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_z
    rows = np.nonzero(keep)[0]
    count = len(rows)
    loss = -log_probs[rows, targets[rows]].sum() / count

    def backward(g):
        d = np.zeros_like(logits.data)
        d[rows] = np.exp(log_probs[rows])
        d[rows, targets[rows]] -= 1.0
        logits.accumulate_grad(d * (float(g) / count))

    return _result(np.asarray(loss), (logits,), backward)


def gather_rows(x: Tensor, indices: Sequence[int]) -> Tensor:
    """Select rows by index (embedding lookup / span slicing)."""
    idx = np.asarray(indices, dtype=np.int64)
    if idx.ndim != 1 or len(idx) == 0:
        raise ShapeError("gather_rows: indices must be a non-empty 1-D sequence")
    if idx.min() < 0 or idx.max() >= x.shape[0]:
        raise IndexError(f"gather_rows: index outside [0, {x.shape[0]})")

    def backward(g):
        d = np.zeros_like(x.data)
        np.add.at(d, idx, g)
        x.accumulate_grad(d)

    return _result(x.data[idx].copy(), (x,), backward)


def mean_rows(x: Tensor) -> Tensor:
    """Arithmetic mean over rows, keeping a single-row result."""
    m = x.shape[0]

    def backward(g):
        x.accumulate_grad(np.broadcast_to(g / m, x.shape).copy())

    return _result(x.data.mean(axis=0, keepdims=True), (x,), backward)


def repeat_rows(x: Tensor, times: int) -> Tensor:
    if x.shape[0] != 1:
        raise ShapeError(f"repeat_rows: expected a single row, got {x.shape}")

    def backward(g):
        x.accumulate_grad(g.sum(axis=0, keepdims=True))

    return _result(np.repeat(x.data, times, axis=0), (x,), backward)


def concat_cols(*parts: Tensor) -> Tensor:
    if not parts:
        raise ValueError("concat_cols: need at least one tensor")
    rows = parts[0].shape[0]
    if any(p.ndim != 2 or p.shape[0] != rows for p in parts):
        raise ShapeError(f"concat_cols: row counts differ: {[p.shape for p in parts]}")
    widths = [p.shape[1] for p in parts]
    offsets = np.cumsum([0] + widths)

    def backward(g):
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            if p.requires_grad or p._parents:
                p.accumulate_grad(g[:, lo:hi])

    return _result(np.concatenate([p.data for p in parts], axis=1), parts, backward)


def slice_cols(x: Tensor, start: int, stop: int) -> Tensor:
    if not (0 <= start < stop <= x.shape[1]):
        raise ShapeError(f"slice_cols: [{start}:{stop}] invalid for shape {x.shape}")

    def backward(g):
        d = np.zeros_like(x.data)
        d[:, start:stop] = g
        x.accumulate_grad(d)

    return _result(x.data[:, start:stop].copy(), (x,), backward)


def dropout(x: Tensor, rate: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout with an explicit generator; callers skip it in eval mode."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout: rate must be in [0, 1), got {rate}")
    if rate == 0.0:
        return x
    keep = (rng.random(x.shape) >= rate).astype(x.data.dtype) / (1.0 - rate)

    def backward(g):
        x.accumulate_grad(g * keep)

    return _result(x.data * keep, (x,), backward)


def sum_all(x: Tensor) -> Tensor:
    def backward(g):
        x.accumulate_grad(np.broadcast_to(g, x.shape).copy())

    return _result(np.asarray(x.data.sum()), (x,), backward)


def grad_check(f: Callable[[], Tensor], params: Sequence[Tensor],
               h: float = 1e-5, samples_per_tensor: int | None = None,
               rng: np.random.Generator | None = None) -> float:
    """Compare analytic gradients of ``f`` against central finite differences.

    ``f`` rebuilds its graph from ``params`` on every call and must return
    a scalar.  All parameters must be float64.  Returns the worst error
    ``|analytic - numeric| / max(1, |analytic|, |numeric|)`` over all
    checked elements; pass ``samples_per_tensor`` to probe a seeded random
    subset of each tensor instead of every element.
    """
    if not 1e-6 <= h <= 1e-4:
        raise ValueError(f"grad_check: h must lie in [1e-6, 1e-4], got {h}")
    for p in params:
        if p.data.dtype != np.float64:
            raise ValueError("grad_check: parameters must be float64 (see using_dtype)")

    out = f()
    if out.data.size != 1:
        raise ValueError(f"grad_check: f must return a scalar, got shape {out.shape}")
    for p in params:
        p.zero_grad()
    out.backward()
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]

    if rng is None:
        rng = np.random.default_rng(0)
    worst = 0.0
    for p, a in zip(params, analytic):
        flat = p.data.reshape(-1)
        if samples_per_tensor is None or flat.size <= samples_per_tensor:
            positions = range(flat.size)
        else:
            positions = rng.choice(flat.size, size=samples_per_tensor, replace=False)
        for pos in positions:
            original = flat[pos]
            flat[pos] = original + h
            f_plus = f().item()
            flat[pos] = original - h
            f_minus = f().item()
            flat[pos] = original
            numeric = (f_plus - f_minus) / (2.0 * h)
            a_val = float(a.reshape(-1)[pos])
            err = abs(a_val - numeric) / max(1.0, abs(a_val), abs(numeric))
            if err > worst:
                worst = err
    if not math.isfinite(worst):
        raise FloatingPointError("grad_check: non-finite error encountered")
    return worst
