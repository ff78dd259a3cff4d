"""
Dense float64 tensors with reverse-mode gradients.

Every differentiable op returns a new ``Tensor`` that remembers its parents
and a closure mapping the output gradient to parent gradients. ``backward``
walks the graph in reverse topological order and accumulates into ``grad``
on leaf tensors that require it (so several backward passes add up until the
optimizer clears them).
"""

import contextlib
from typing import Callable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from src.utils.error_handling import ShapeMismatch

ArrayLike = Union["Tensor", np.ndarray, float, int, Sequence]
BackwardFn = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]

_grad_enabled = True


@contextlib.contextmanager
def no_grad() -> Iterator[None]:
    """Build no graph inside the block (inference)."""
    global _grad_enabled
    previous, _grad_enabled = _grad_enabled, False
    try:
        yield
    finally:
        _grad_enabled = previous


def is_grad_enabled() -> bool:
    return _grad_enabled


class Tensor:
    """A numpy array plus the bookkeeping reverse-mode differentiation needs."""

    def __init__(
        self,
        values: ArrayLike,
        requires_grad: bool = False,
        parents: Tuple["Tensor", ...] = (),
        backward_fn: Optional[BackwardFn] = None,
        name: Optional[str] = None,
    ):
        if isinstance(values, Tensor):
            values = values.values
        self.values = np.array(values, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.parents = parents
        self._backward_fn = backward_fn
        self.name = name

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.shape}, requires_grad={self.requires_grad})"

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.values.shape

    @property
    def ndim(self) -> int:
        return self.values.ndim

    @property
    def size(self) -> int:
        return int(self.values.size)

    @property
    def is_leaf(self) -> bool:
        return not self.parents

    def numpy(self) -> np.ndarray:
        return self.values

    def detach(self) -> "Tensor":
        return Tensor(self.values.copy())

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self, grad: Optional[np.ndarray] = None) -> None:
        """
        Propagate ``grad`` (ones for a scalar) back to every leaf.

        Raises:
            ShapeMismatch: If no seed is given for a non-scalar tensor
        """
        if grad is None:
            if self.size != 1:
                raise ShapeMismatch(
                    "backward() needs an explicit gradient for non-scalar tensors",
                    {"shape": list(self.shape)},
                )
            grad = np.ones_like(self.values)
        grad = np.asarray(grad, dtype=np.float64)
        if grad.shape != self.shape:
            raise ShapeMismatch(
                "Seed gradient does not match the tensor",
                {"expected": list(self.shape), "actual": list(grad.shape)},
            )

        pending = {id(self): grad}
        for node in reversed(_topological_order(self)):
            node_grad = pending.pop(id(node), None)
            if node_grad is None:
                continue
            if node.is_leaf:
                node.grad = node_grad.copy() if node.grad is None else node.grad + node_grad
                continue
            for parent, parent_grad in zip(node.parents, node._backward_fn(node_grad)):
                if parent_grad is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in pending:
                    pending[key] = pending[key] + parent_grad
                else:
                    pending[key] = parent_grad

    # Operators

    def __add__(self, other: ArrayLike) -> "Tensor":
        return add(self, other)

    def __radd__(self, other: ArrayLike) -> "Tensor":
        return add(other, self)

    def __sub__(self, other: ArrayLike) -> "Tensor":
        return sub(self, other)

    def __rsub__(self, other: ArrayLike) -> "Tensor":
        return sub(other, self)

    def __mul__(self, other: ArrayLike) -> "Tensor":
        return mul(self, other)

    def __rmul__(self, other: ArrayLike) -> "Tensor":
        return mul(other, self)

    def __truediv__(self, other: float) -> "Tensor":
        return mul(self, 1.0 / other)

    def __neg__(self) -> "Tensor":
        return neg(self)

    def __matmul__(self, other: ArrayLike) -> "Tensor":
        return matmul(self, other)

    def __getitem__(self, index) -> "Tensor":
        return index_select(self, index)

    def reshape(self, *shape: int) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes: int) -> "Tensor":
        return transpose(self, axes or None)

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        return tensor_sum(self, axis, keepdims)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        return tensor_mean(self, axis, keepdims)


def _topological_order(root: Tensor) -> List[Tensor]:
    order: List[Tensor] = []
    seen = set()
    stack: List[Tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node.parents:
            if parent.requires_grad and id(parent) not in seen:
                stack.append((parent, False))
    return order


def as_tensor(value: ArrayLike) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _result(
    values: np.ndarray, parents: Sequence[Tensor], backward_fn: BackwardFn
) -> Tensor:
    tracked = _grad_enabled and any(p.requires_grad for p in parents)
    if not tracked:
        return Tensor(values)
    return Tensor(values, requires_grad=True, parents=tuple(parents), backward_fn=backward_fn)


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# Elementwise arithmetic


def add(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def backward(g: np.ndarray):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _result(a.values + b.values, (a, b), backward)


def sub(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def backward(g: np.ndarray):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _result(a.values - b.values, (a, b), backward)


def mul(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def backward(g: np.ndarray):
        return _unbroadcast(g * b.values, a.shape), _unbroadcast(g * a.values, b.shape)

    return _result(a.values * b.values, (a, b), backward)


def neg(a: Tensor) -> Tensor:
    return _result(-a.values, (a,), lambda g: (-g,))


def absolute(a: Tensor) -> Tensor:
    sign = np.sign(a.values)
    return _result(np.abs(a.values), (a,), lambda g: (g * sign,))


def relu(a: Tensor) -> Tensor:
    active = a.values > 0
    return _result(np.where(active, a.values, 0.0), (a,), lambda g: (g * active,))


_GELU_C = np.sqrt(2.0 / np.pi)


def gelu(a: Tensor) -> Tensor:
    """GELU, tanh approximation."""
    x = a.values
    inner = _GELU_C * (x + 0.044715 * x**3)
    t = np.tanh(inner)

    def backward(g: np.ndarray):
        d_inner = _GELU_C * (1.0 + 3.0 * 0.044715 * x**2)
        return (g * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t**2) * d_inner),)

    return _result(0.5 * x * (1.0 + t), (a,), backward)


# Linear algebra and shape ops


def matmul(a: ArrayLike, b: ArrayLike) -> Tensor:
    """Batched matrix product over the last two axes (both operands >= 2-D)."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeMismatch(
            "matmul operands do not align",
            {"left": list(a.shape), "right": list(b.shape)},
        )

    def backward(g: np.ndarray):
        ga = g @ np.swapaxes(b.values, -1, -2)
        gb = np.swapaxes(a.values, -1, -2) @ g
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return _result(a.values @ b.values, (a, b), backward)


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    original = a.shape
    return _result(a.values.reshape(shape), (a,), lambda g: (g.reshape(original),))


def transpose(a: Tensor, axes: Optional[Sequence[int]] = None) -> Tensor:
    if axes is None:
        axes = tuple(reversed(range(a.ndim)))
    inverse = tuple(np.argsort(axes))
    return _result(
        np.transpose(a.values, axes), (a,), lambda g: (np.transpose(g, inverse),)
    )


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    values = np.concatenate([t.values for t in tensors], axis=axis)
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g: np.ndarray):
        return tuple(np.split(g, bounds, axis=axis))

    return _result(values, tensors, backward)


def index_select(a: Tensor, index) -> Tensor:
    """Basic or advanced indexing; repeated indices accumulate in backward."""

    def backward(g: np.ndarray):
        full = np.zeros_like(a.values)
        np.add.at(full, index, g)
        return (full,)

    return _result(a.values[index], (a,), backward)


def take_rows(a: Tensor, rows: np.ndarray) -> Tensor:
    """``a[rows]`` for an integer array of any shape."""
    return index_select(a, np.asarray(rows, dtype=np.int64))


# Reductions


def tensor_sum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    def backward(g: np.ndarray):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return _result(a.values.sum(axis=axis, keepdims=keepdims), (a,), backward)


def tensor_mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    if axis is None:
        count = a.size
    else:
        axes = (axis,) if isinstance(axis, int) else tuple(axis)
        count = int(np.prod([a.shape[ax] for ax in axes]))
    return mul(tensor_sum(a, axis, keepdims), 1.0 / count)


def tensor_max(a: Tensor, axis: int) -> Tensor:
    """Maximum along ``axis``; the gradient goes to the first maximal entry."""
    winners = np.expand_dims(np.argmax(a.values, axis=axis), axis)
    values = np.take_along_axis(a.values, winners, axis=axis).squeeze(axis)

    def backward(g: np.ndarray):
        full = np.zeros_like(a.values)
        np.put_along_axis(full, winners, np.expand_dims(g, axis), axis=axis)
        return (full,)

    return _result(values, (a,), backward)


# Normalizations


def softmax(a: Tensor, axis: int = -1, mask: Optional[np.ndarray] = None) -> Tensor:
    """
    Softmax along ``axis``. Entries where the broadcastable boolean ``mask`` is
    False get probability zero.
    """
    logits = a.values
    if mask is not None:
        logits = np.where(mask, logits, -np.inf)
    shifted = logits - np.max(logits, axis=axis, keepdims=True)
    exp = np.exp(shifted)
    probs = exp / exp.sum(axis=axis, keepdims=True)

    def backward(g: np.ndarray):
        return (probs * (g - (g * probs).sum(axis=axis, keepdims=True)),)

    return _result(probs, (a,), backward)


LAYER_NORM_EPS = 1e-5


def layer_norm(
    x: Tensor, gain: Tensor, bias: Tensor, eps: float = LAYER_NORM_EPS
) -> Tensor:
    """
    Standardize the last axis (biased variance, ``eps`` inside the root), then
    scale by ``gain`` and shift by ``bias``.
    """
    d = x.shape[-1]
    if d < 2 or gain.shape != (d,) or bias.shape != (d,):
        raise ShapeMismatch(
            "layer_norm needs a last axis of at least 2 matching gain and bias",
            {"input": list(x.shape), "gain": list(gain.shape), "bias": list(bias.shape)},
        )
    mu = x.values.mean(axis=-1, keepdims=True)
    centered = x.values - mu
    inv_std = 1.0 / np.sqrt((centered**2).mean(axis=-1, keepdims=True) + eps)
    x_hat = centered * inv_std

    def backward(g: np.ndarray):
        g_hat = g * gain.values
        gx = (inv_std / d) * (
            d * g_hat
            - g_hat.sum(axis=-1, keepdims=True)
            - x_hat * (g_hat * x_hat).sum(axis=-1, keepdims=True)
        )
        leading = tuple(range(x.ndim - 1))
        return gx, (g * x_hat).sum(axis=leading), g.sum(axis=leading)

    return _result(x_hat * gain.values + bias.values, (x, gain, bias), backward)


def normalize_rows(x: Tensor, eps: float = 1e-12) -> Tensor:
    """Scale every vector along the last axis to unit length."""
    norms = np.sqrt((x.values**2).sum(axis=-1, keepdims=True))
    norms = np.maximum(norms, eps)
    unit = x.values / norms

    def backward(g: np.ndarray):
        return ((g - unit * (g * unit).sum(axis=-1, keepdims=True)) / norms,)

    return _result(unit, (x,), backward)


# Convolution


def conv2d_3x3(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """
    3x3 convolution, stride 1, zero padding 1.

    Args:
        x: (n, c_in, h, w)
        weight: (c_in * 9, c_out), rows ordered (channel, ky, kx)
        bias: (c_out,)

    Returns:
        (n, c_out, h, w)
    """
    if x.ndim != 4 or weight.shape[0] != x.shape[1] * 9 or bias.shape != (weight.shape[1],):
        raise ShapeMismatch(
            "conv2d_3x3 shapes do not agree",
            {"input": list(x.shape), "weight": list(weight.shape), "bias": list(bias.shape)},
        )
    n, c_in, h, w = x.shape
    c_out = weight.shape[1]
    padded = np.pad(x.values, ((0, 0), (0, 0), (1, 1), (1, 1)))

    def columns() -> np.ndarray:
        # (n, c, h, w, 3, 3) -> (n, h, w, c, 3, 3) -> (n*h*w, c*9)
        windows = sliding_window_view(padded, (3, 3), axis=(2, 3))
        return windows.transpose(0, 2, 3, 1, 4, 5).reshape(n * h * w, c_in * 9)

    out = columns() @ weight.values + bias.values
    out = out.reshape(n, h, w, c_out).transpose(0, 3, 1, 2)

    def backward(g: np.ndarray):
        g_rows = g.transpose(0, 2, 3, 1).reshape(n * h * w, c_out)
        g_weight = columns().T @ g_rows
        g_bias = g_rows.sum(axis=0)
        g_cols = (g_rows @ weight.values.T).reshape(n, h, w, c_in, 3, 3)
        g_padded = np.zeros_like(padded)
        for ky in range(3):
            for kx in range(3):
                g_padded[:, :, ky : ky + h, kx : kx + w] += g_cols[
                    :, :, :, :, ky, kx
                ].transpose(0, 3, 1, 2)
        return g_padded[:, :, 1:-1, 1:-1], g_weight, g_bias

    return _result(np.ascontiguousarray(out), (x, weight, bias), backward)
