"""Differentiable building blocks: linear maps, layer norm, masked multi-head
self-attention, a gated recurrent cell, and batch padding utilities."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ShapeMismatch
from . import tensor as T
from .tensor import Tensor

LAYER_NORM_EPS = 1e-12


@dataclass
class PaddedBatch:
    """B sequences padded to a common length; positions >= lengths[i] are
    masked out of attention and pooling."""

    data: np.ndarray     # (B, T_max, D)
    lengths: np.ndarray  # (B,) int

    def __post_init__(self):
        if self.data.ndim != 3:
            raise ShapeMismatch(f"PaddedBatch data must be 3-D, got {self.data.shape}")
        if len(self.lengths) != self.data.shape[0]:
            raise ShapeMismatch("lengths count must match batch size")
        if (self.lengths < 1).any() or (self.lengths > self.data.shape[1]).any():
            raise ShapeMismatch("each length must satisfy 1 <= length <= T_max")

    @classmethod
    def from_frames(cls, frames_list, dtype=np.float32) -> "PaddedBatch":
        lengths = np.array([f.shape[0] for f in frames_list], dtype=np.int64)
        t_max = int(lengths.max())
        dim = frames_list[0].shape[1]
        data = np.zeros((len(frames_list), t_max, dim), dtype=dtype)
        for i, f in enumerate(frames_list):
            data[i, : f.shape[0]] = f
        return cls(data=data, lengths=lengths)

    def valid_mask(self) -> np.ndarray:
        """(B, T_max) boolean, True at real frames."""
        return np.arange(self.data.shape[1])[None, :] < self.lengths[:, None]


def linear(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    out = T.matmul(x, w)
    return out if b is None else T.add(out, b)


def gelu(x: Tensor) -> Tensor:
    """Gaussian-error-style gate, tanh form. Smooth everywhere, which keeps
    finite-difference gradient checks clean."""
    return T.gelu(x)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = LAYER_NORM_EPS) -> Tensor:
    """Normalize the last axis to mean 0 / variance 1, then scale and shift."""
    return T.layer_norm(x, gain, bias, eps)


def multi_head_attention(
    x: Tensor,
    key_mask: np.ndarray,
    wq: Tensor, bq: Tensor,
    wk: Tensor,
    wv: Tensor, bv: Tensor,
    wo: Tensor, bo: Tensor,
    n_heads: int,
) -> Tensor:
    """Masked multi-head self-attention. key_mask is (B, T) boolean; masked
    key positions get attention weight exactly 0.

    The key projection carries no bias: a constant added to every key
    shifts each score row uniformly, which the softmax cancels, so such a
    parameter would be an exactly-flat direction."""
    batch, t_len, model_dim = x.shape
    if model_dim % n_heads != 0:
        raise ShapeMismatch(f"model_dim {model_dim} not divisible by n_heads {n_heads}")
    head_dim = model_dim // n_heads

    def split_heads(t: Tensor) -> Tensor:
        return T.transpose(T.reshape(t, (batch, t_len, n_heads, head_dim)), (0, 2, 1, 3))

    q = split_heads(linear(x, wq, bq))
    k = split_heads(linear(x, wk))
    v = split_heads(linear(x, wv, bv))

    scores = T.matmul(q, T.transpose(k, (0, 1, 3, 2))) * (1.0 / np.sqrt(head_dim))
    weights = T.masked_softmax(scores, key_mask[:, None, None, :])
    mixed = T.matmul(weights, v)  # (B, h, T, head_dim)
    merged = T.reshape(T.transpose(mixed, (0, 2, 1, 3)), (batch, t_len, model_dim))
    return linear(merged, wo, bo)


def gru_step(x: Tensor, h: Tensor, p: dict, prefix: str) -> Tensor:
    """One gated recurrent cell update for a (B, D) input and (B, H) state."""
    r = T.sigmoid(linear(x, p[f"{prefix}.w_ir"], p[f"{prefix}.b_ir"])
                  + linear(h, p[f"{prefix}.w_hr"], p[f"{prefix}.b_hr"]))
    z = T.sigmoid(linear(x, p[f"{prefix}.w_iz"], p[f"{prefix}.b_iz"])
                  + linear(h, p[f"{prefix}.w_hz"], p[f"{prefix}.b_hz"]))
    n = T.tanh(linear(x, p[f"{prefix}.w_in"], p[f"{prefix}.b_in"])
               + r * linear(h, p[f"{prefix}.w_hn"], p[f"{prefix}.b_hn"]))
    return (1.0 - z) * n + z * h


GRU_GATES = ("ir", "iz", "in", "hr", "hz", "hn")


def sinusoidal_positions(n_positions: int, dim: int, dtype) -> np.ndarray:
    """Standard fixed sin/cos positional table, shape (n_positions, dim)."""
    pos = np.arange(n_positions, dtype=np.float64)[:, None]
    idx = np.arange(dim, dtype=np.float64)[None, :]
    angle = pos / np.power(10000.0, 2.0 * np.floor(idx / 2.0) / dim)
    table = np.where(idx % 2 == 0, np.sin(angle), np.cos(angle))
    return table.astype(dtype)
