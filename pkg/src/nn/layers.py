"""
Layers used by the denoising network.

ReLU follows convolutions and edge convolutions, GELU sits inside the
transformer MLPs. Affine and attention weights start from a truncated normal
(std 0.02), convolutions from He initialization, biases at zero.
"""

from typing import Optional

import numpy as np

from src.nn.module import Module, Parameter, kaiming_normal, truncated_normal
from src.nn.tensor import (
    Tensor,
    add,
    concat,
    conv2d_3x3,
    gelu,
    layer_norm,
    matmul,
    relu,
    softmax,
    sub,
    take_rows,
    tensor_max,
    transpose,
)
from src.utils.error_handling import HeadDivisibility, ShapeMismatch, TooFewPoints

AFFINE_INIT_STD = 0.02


def affine(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """
    ``x W + b`` over the last axis of ``x``.

    Raises:
        ShapeMismatch: If the widths disagree
    """
    if x.shape[-1] != weight.shape[0] or bias.shape != (weight.shape[1],):
        raise ShapeMismatch(
            "affine shapes do not agree",
            {"input": list(x.shape), "weight": list(weight.shape), "bias": list(bias.shape)},
        )
    if x.ndim == 1:
        raise ShapeMismatch("affine needs at least a 2-D input", {"input": list(x.shape)})
    return add(matmul(x, weight), bias)


class Linear(Module):
    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator):
        self.weight = Parameter(truncated_normal(rng, (d_in, d_out), AFFINE_INIT_STD))
        self.bias = Parameter(np.zeros(d_out))

    def forward(self, x: Tensor) -> Tensor:
        return affine(x, self.weight, self.bias)


class LayerNorm(Module):
    def __init__(self, d: int):
        self.gain = Parameter(np.ones(d))
        self.bias = Parameter(np.zeros(d))

    def forward(self, x: Tensor) -> Tensor:
        return layer_norm(x, self.gain, self.bias)


class MultiHeadSelfAttention(Module):
    """
    Scaled dot-product self-attention without positional encoding or causal
    masking. An optional boolean token mask removes tokens from the keys.
    """

    def __init__(self, width: int, heads: int, rng: np.random.Generator):
        if heads < 1 or width % heads:
            raise HeadDivisibility(
                f"Width {width} is not divisible by {heads} heads",
                {"width": width, "heads": heads},
            )
        self.width = width
        self.heads = heads
        self.query = Linear(width, width, rng)
        self.key = Linear(width, width, rng)
        self.value = Linear(width, width, rng)
        self.output = Linear(width, width, rng)

    def _split(self, x: Tensor) -> Tensor:
        n = x.shape[0]
        return transpose(x.reshape(n, self.heads, self.width // self.heads), (1, 0, 2))

    def forward(self, x: Tensor, mask: Optional[np.ndarray] = None) -> Tensor:
        if x.ndim != 2 or x.shape[1] != self.width:
            raise ShapeMismatch(
                "Attention input must be (tokens, width)",
                {"input": list(x.shape), "width": self.width},
            )
        n = x.shape[0]
        q = self._split(self.query(x))
        k = self._split(self.key(x))
        v = self._split(self.value(x))

        scale = 1.0 / np.sqrt(self.width // self.heads)
        scores = matmul(q, transpose(k, (0, 2, 1))) * scale
        key_mask = None if mask is None else np.asarray(mask, dtype=bool)[None, None, :]
        attention = softmax(scores, axis=-1, mask=key_mask)
        mixed = transpose(matmul(attention, v), (1, 0, 2)).reshape(n, self.width)
        return self.output(mixed)


def multi_head_self_attention(
    x: Tensor, layer: MultiHeadSelfAttention, mask: Optional[np.ndarray] = None
) -> Tensor:
    return layer(x, mask)


class Conv2d(Module):
    """3x3 convolution with padding 1."""

    def __init__(self, c_in: int, c_out: int, rng: np.random.Generator):
        self.weight = Parameter(kaiming_normal(rng, (c_in * 9, c_out), c_in * 9))
        self.bias = Parameter(np.zeros(c_out))

    def forward(self, x: Tensor) -> Tensor:
        return conv2d_3x3(x, self.weight, self.bias)


class ResidualConvBlock(Module):
    """``x + conv(relu(conv(x)))`` with two 3x3 convolutions of equal width."""

    def __init__(self, channels: int, rng: np.random.Generator):
        self.channels = channels
        self.conv1 = Conv2d(channels, channels, rng)
        self.conv2 = Conv2d(channels, channels, rng)

    def forward(self, x: Tensor) -> Tensor:
        if x.ndim != 4 or x.shape[1] != self.channels:
            raise ShapeMismatch(
                "Residual block input must be (n, channels, h, w)",
                {"input": list(x.shape), "channels": self.channels},
            )
        return add(x, self.conv2(relu(self.conv1(x))))


def residual_conv_block(x: Tensor, block: ResidualConvBlock) -> Tensor:
    return block(x)


def knn_indices(
    points: np.ndarray, k: int, mask: Optional[np.ndarray] = None
) -> np.ndarray:
    """
    Indices of the ``k`` nearest other points of every point (Euclidean).

    Ties are broken by lower index. Points where ``mask`` is False are never
    chosen as neighbours.

    Raises:
        TooFewPoints: If fewer than ``k + 1`` candidate points exist
    """
    n = len(points)
    candidates = n if mask is None else int(np.count_nonzero(mask))
    if k < 1 or candidates <= k:
        raise TooFewPoints(
            f"k-NN with k={k} needs more than {k} points, got {candidates}",
            {"k": k, "points": candidates},
        )
    squared = np.einsum("ij,ij->i", points, points)
    distances = squared[:, None] + squared[None, :] - 2.0 * points @ points.T
    np.maximum(distances, 0.0, out=distances)
    np.fill_diagonal(distances, np.inf)
    if mask is not None:
        distances[:, ~np.asarray(mask, dtype=bool)] = np.inf
    return np.argsort(distances, axis=1, kind="stable")[:, :k]


class EdgeConv(Module):
    """
    Graph convolution over the feature-space k-NN graph: a shared
    ``relu(affine([x_i, x_j - x_i]))`` per edge, max over each point's edges.
    """

    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator):
        self.edge = Linear(2 * d_in, d_out, rng)

    def forward(self, x: Tensor, k: int, mask: Optional[np.ndarray] = None) -> Tensor:
        neighbours = knn_indices(x.values, k, mask)
        n = x.shape[0]
        centers = take_rows(x, np.repeat(np.arange(n)[:, None], k, axis=1))
        features = concat([centers, sub(take_rows(x, neighbours), centers)], axis=-1)
        return tensor_max(relu(self.edge(features)), axis=1)


def edge_conv(
    x: Tensor, k: int, layer: EdgeConv, mask: Optional[np.ndarray] = None
) -> Tensor:
    return layer(x, k, mask)


class MLP(Module):
    def __init__(self, width: int, hidden: int, rng: np.random.Generator):
        self.fc1 = Linear(width, hidden, rng)
        self.fc2 = Linear(hidden, width, rng)

    def forward(self, x: Tensor) -> Tensor:
        return self.fc2(gelu(self.fc1(x)))


class EncoderBlock(Module):
    """Pre-norm transformer encoder: attention then MLP, each with a residual."""

    def __init__(self, width: int, heads: int, hidden: int, rng: np.random.Generator):
        self.norm1 = LayerNorm(width)
        self.attention = MultiHeadSelfAttention(width, heads, rng)
        self.norm2 = LayerNorm(width)
        self.mlp = MLP(width, hidden, rng)

    def forward(self, x: Tensor, mask: Optional[np.ndarray] = None) -> Tensor:
        x = add(self.attention(self.norm1(x), mask), x)
        return add(self.mlp(self.norm2(x)), x)
