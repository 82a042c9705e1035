"""Small neural-network building blocks: MLPs, positional encoding, activations."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .tensor import DiffcoreError, Tensor

_ACTIVATIONS = {
    "linear": lambda x: x,
    "relu": T.relu,
    "tanh": T.tanh,
    "sigmoid": T.sigmoid,
    "softplus": T.softplus,
}


@dataclass
class MlpWeights:
    """Per-layer weight matrices, bias vectors and activation tags.

    Layer i maps width ``weights[i].shape[0]`` to ``weights[i].shape[1]``;
    consecutive widths must chain.
    """

    weights: list[Tensor] = field(default_factory=list)
    biases: list[Tensor] = field(default_factory=list)
    activations: list[str] = field(default_factory=list)

    def __post_init__(self):
        for i in range(len(self.weights) - 1):
            if self.weights[i].shape[1] != self.weights[i + 1].shape[0]:
                raise DiffcoreError(
                    f"layer {i} output width {self.weights[i].shape[1]} does not chain "
                    f"into layer {i + 1} input width {self.weights[i + 1].shape[0]}"
                )
        for w, b in zip(self.weights, self.biases):
            if b.shape != (w.shape[1],):
                raise DiffcoreError("bias width must match layer output width")
            if not (np.isfinite(w.data).all() and np.isfinite(b.data).all()):
                raise DiffcoreError("non-finite MLP weights")

    @property
    def in_width(self) -> int:
        return self.weights[0].shape[0]

    @property
    def out_width(self) -> int:
        return self.weights[-1].shape[1]

    def parameters(self) -> list[Tensor]:
        return list(self.weights) + list(self.biases)


def mlp_init(widths: list[int], hidden_activation: str, rng: np.random.Generator, scale: float = 1.0) -> MlpWeights:
    """Xavier-style init; the final layer is linear."""
    ws, bs, acts = [], [], []
    for i in range(len(widths) - 1):
        fan_in, fan_out = widths[i], widths[i + 1]
        std = scale * np.sqrt(2.0 / (fan_in + fan_out))
        ws.append(Tensor(rng.normal(0.0, std, size=(fan_in, fan_out)), requires_grad=True))
        bs.append(Tensor(np.zeros(fan_out), requires_grad=True))
        acts.append(hidden_activation if i < len(widths) - 2 else "linear")
    return MlpWeights(ws, bs, acts)


def mlp_forward(w: MlpWeights, x: Tensor) -> Tensor:
    """Apply the MLP to a (batch, in_width) tensor."""
    x = T.as_tensor(x)
    if x.shape[-1] != w.in_width:
        raise DiffcoreError(f"input width {x.shape[-1]} != first layer width {w.in_width}")
    h = x
    for wi, bi, act in zip(w.weights, w.biases, w.activations):
        h = T.matmul(h, wi) + bi
        h = _ACTIVATIONS[act](h)
    return h


def positional_encoding(x: Tensor, num_freqs: int) -> Tensor:
    """NeRF-style encoding of (..., n) into (..., 2 * num_freqs * n).

    Layout is frequency-major: blocks of [sin(2^0 pi x), cos(2^0 pi x),
    sin(2^1 pi x), cos(2^1 pi x), ...], each block of width n.
    """
    if num_freqs < 1:
        raise DiffcoreError("positional_encoding needs num_freqs >= 1")
    x = T.as_tensor(x)
    parts = []
    for level in range(num_freqs):
        scaled = x * (np.pi * (2.0**level))
        parts.append(T.sin(scaled))
        parts.append(T.cos(scaled))
    return T.concatenate(parts, axis=-1)


def softplus_scale(raw: Tensor, base_scale: float) -> Tensor:
    """Strictly positive scales: softplus(raw) * base_scale.

    raw = 0 maps to ln(2) * base_scale; by convention base_scale is a small
    fraction of the head bounding-box diagonal (default 1%).
    """
    return T.softplus(raw) * float(base_scale)


def tanh_offset(raw: Tensor, bound: float) -> Tensor:
    """Offsets bounded to (-bound, +bound) via tanh; raw = 0 maps to 0."""
    return T.tanh(raw) * float(bound)


def bilinear_sample(grid: Tensor, coords: Tensor, *, clamp: bool = True) -> Tensor:
    """Bilinearly interpolate an (H, W, C) grid at (N, 2) unit-square coords.

    Coordinate convention: coords[:, 0] runs along width, coords[:, 1] along
    height; (0, 0) is the center of texel [0, 0] and (1, 1) the center of
    texel [-1, -1].  Differentiable w.r.t. both grid values and coords
    (piecewise-bilinear in the latter).  Out-of-square coords are clamped.
    """
    grid = T.as_tensor(grid)
    coords = T.as_tensor(coords)
    h, w = grid.shape[0], grid.shape[1]
    if clamp:
        coords = T.minimum(T.maximum(coords, 0.0), 1.0)
    px = coords[:, 0] * float(w - 1)
    py = coords[:, 1] * float(h - 1)
    x0d = np.clip(np.floor(px.data).astype(np.int64), 0, w - 2) if w > 1 else np.zeros(px.shape, np.int64)
    y0d = np.clip(np.floor(py.data).astype(np.int64), 0, h - 2) if h > 1 else np.zeros(py.shape, np.int64)
    fx = px - x0d
    fy = py - y0d
    c00 = grid[(y0d, x0d)]
    c01 = grid[(y0d, x0d + (1 if w > 1 else 0))]
    c10 = grid[(y0d + (1 if h > 1 else 0), x0d)]
    c11 = grid[(y0d + (1 if h > 1 else 0), x0d + (1 if w > 1 else 0))]
    fx = fx.reshape(-1, 1)
    fy = fy.reshape(-1, 1)
    one = 1.0
    top = c00 * (one - fx) + c01 * fx
    bot = c10 * (one - fx) + c11 * fx
    return top * (one - fy) + bot * fy
