"""Acoustic word embedders.

Five ways to turn a variable-length frame sequence into one fixed vector:
frame averaging, equally spaced frame concatenation, a recurrent
encoder-decoder, a recurrent contrastive encoder, and a transformer
contrastive encoder.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .corpus import FeatureSequence
from .errors import DimMismatch, EmptySequence, InvalidLength, NonFiniteValue
from .nn.layers import (
    GRU_GATES,
    PaddedBatch,
    gelu,
    gru_step,
    layer_norm,
    linear,
    multi_head_attention,
    sinusoidal_positions,
)
from .nn.params import ParameterStore, load_checkpoint, save_checkpoint
from .nn.tensor import Tensor, broadcast_to, concat


@dataclass(frozen=True)
class Awe:
    """A fixed-dimensional embedding of one spoken word segment."""

    vector: np.ndarray
    embedder_id: str

    def __post_init__(self):
        if not np.isfinite(self.vector).all():
            raise NonFiniteValue(f"{self.embedder_id} embedding is non-finite")


@dataclass(frozen=True)
class TransformerConfig:
    input_dim: int
    n_layers: int = 3
    n_heads: int = 16
    model_dim: int = 256
    ffn_dim: int = 1024
    awe_dim: int = 256

    def __post_init__(self):
        if min(self.input_dim, self.n_layers, self.n_heads, self.model_dim,
               self.ffn_dim, self.awe_dim) < 1:
            raise ValueError("all transformer dimensions must be positive")
        if self.model_dim % self.n_heads:
            raise ValueError(
                f"model_dim {self.model_dim} not divisible by n_heads {self.n_heads}")


@dataclass(frozen=True)
class RnnConfig:
    input_dim: int
    n_layers: int = 3
    hidden_dim: int = 400
    awe_dim: int = 256

    def __post_init__(self):
        if min(self.input_dim, self.n_layers, self.hidden_dim, self.awe_dim) < 1:
            raise ValueError("all recurrent dimensions must be positive")


@dataclass(frozen=True)
class SubsampleConfig:
    k: int = 10

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be at least 1")


def subsample_indices(n_frames: int, k: int) -> np.ndarray:
    """Indices of k equally spaced frames: round(i*(T-1)/(K-1)), half away
    from zero. Repeats indices when T < k; all zeros when T = 1."""
    if k == 1:
        return np.zeros(1, dtype=np.intp)
    pos = np.arange(k) * ((n_frames - 1) / (k - 1))
    return np.floor(pos + 0.5).astype(np.intp)


def _check_frames(frames: np.ndarray) -> np.ndarray:
    frames = np.asarray(frames)
    if frames.ndim != 2 or frames.shape[0] < 1:
        raise EmptySequence("expected a nonempty (T, D) frame matrix")
    return frames


def meanpool(seq) -> Awe:
    """Arithmetic mean over frames. Accepts a FeatureSequence or array."""
    frames = _check_frames(seq.frames if isinstance(seq, FeatureSequence) else seq)
    return Awe(frames.mean(axis=0), "meanpool")


def subsample(seq, cfg: SubsampleConfig = SubsampleConfig()) -> Awe:
    """Concatenation of cfg.k equally spaced frames; output dim is k*D."""
    frames = _check_frames(seq.frames if isinstance(seq, FeatureSequence) else seq)
    idx = subsample_indices(frames.shape[0], cfg.k)
    return Awe(frames[idx].reshape(-1), "subsample")


class Embedder:
    """Common surface: embed one sequence or a batch of frame matrices."""

    embedder_id: str

    def embed_batch(self, frames_list) -> np.ndarray:
        raise NotImplementedError

    def embed(self, seq: FeatureSequence) -> Awe:
        frames = seq.frames if isinstance(seq, FeatureSequence) else seq
        return Awe(self.embed_batch([frames])[0], self.embedder_id)


class MeanpoolEmbedder(Embedder):
    embedder_id = "meanpool"

    def embed_batch(self, frames_list) -> np.ndarray:
        return np.stack([_check_frames(f).mean(axis=0) for f in frames_list])


class SubsampleEmbedder(Embedder):
    embedder_id = "subsample"

    def __init__(self, cfg: SubsampleConfig = SubsampleConfig()):
        self.cfg = cfg

    def embed_batch(self, frames_list) -> np.ndarray:
        return np.stack([subsample(f, self.cfg).vector for f in frames_list])


class _TrainableEmbedder(Embedder):
    """Parameterized embedder: owns a ParameterStore, exposes a
    differentiable batch forward plus tape-free inference."""

    config_cls: type

    def __init__(self, cfg, store: ParameterStore):
        self.cfg = cfg
        self.store = store

    @classmethod
    def initialize(cls, cfg, seed: int, dtype=np.float32):
        store = ParameterStore(dtype)
        cls._init_params(cfg, store, np.random.default_rng(seed))
        return cls(cfg, store)

    @classmethod
    def _init_params(cls, cfg, store: ParameterStore, rng: np.random.Generator):
        raise NotImplementedError

    def forward_batch(self, p: dict[str, Tensor], batch: PaddedBatch) -> Tensor:
        raise NotImplementedError

    def _check_dim(self, d: int) -> None:
        if d != self.cfg.input_dim:
            raise DimMismatch(
                f"{self.embedder_id}: expected {self.cfg.input_dim}-dim frames, got {d}")

    def embed_batch(self, frames_list, chunk: int = 256) -> np.ndarray:
        frames_list = [_check_frames(f) for f in frames_list]
        self._check_dim(frames_list[0].shape[1])
        p = self.store.tensors(requires_grad=False)
        out = []
        for lo in range(0, len(frames_list), chunk):
            batch = PaddedBatch.from_frames(frames_list[lo:lo + chunk],
                                            dtype=self.store.dtype)
            out.append(self.forward_batch(p, batch).data)
        return np.concatenate(out, axis=0)

    def save(self, path) -> None:
        meta = {"embedder_id": self.embedder_id, "config": asdict(self.cfg)}
        save_checkpoint(self.store, path, meta)


def _init_gru_stack(store, rng, prefix, n_layers, input_dim, hidden_dim):
    for layer in range(n_layers):
        d_in = input_dim if layer == 0 else hidden_dim
        for gate in GRU_GATES:
            fan = d_in if gate.startswith("i") else hidden_dim
            store.add_glorot(f"{prefix}{layer}.w_{gate}", (fan, hidden_dim), rng)
            store.add_zeros(f"{prefix}{layer}.b_{gate}", (hidden_dim,))


def _run_gru_stack(p, batch_data: Tensor, lengths, prefix, n_layers, hidden_dim):
    """Stacked unidirectional recurrence over a padded batch.

    Steps past a sequence's true length leave its state untouched, so the
    returned final state matches an unpadded run exactly.

    Returns (per-step outputs of the top layer, final top-layer state).
    """
    b, t_max = batch_data.data.shape[0], batch_data.data.shape[1]
    dtype = batch_data.data.dtype
    step_mask = (np.arange(t_max)[None, :] < np.asarray(lengths)[:, None])
    step_mask = step_mask.astype(dtype)[:, :, None]

    inputs = [batch_data[:, t] for t in range(t_max)]
    final = None
    for layer in range(n_layers):
        h = Tensor(np.zeros((b, hidden_dim), dtype=dtype))
        outputs = []
        for t in range(t_max):
            cand = gru_step(inputs[t], h, p, f"{prefix}{layer}")
            m = step_mask[:, t]
            h = cand * m + h * (1.0 - m)
            outputs.append(h)
        inputs = outputs
        final = h
    return inputs, final


class TransformerEmbedder(_TrainableEmbedder):
    """Self-attention encoder read out at a prepended trainable token.

    Frames are projected to model_dim, a trainable all-ones token is placed
    at position 0, sinusoidal position codes are added, and the stack of
    pre-norm attention/feed-forward blocks runs with padding masked out of
    the attention keys. The embedding is a linear map of the final-layer
    state at position 0.
    """

    embedder_id = "contrastive-transformer"
    config_cls = TransformerConfig

    @classmethod
    def _init_params(cls, cfg, store, rng):
        store.add_glorot("input.w", (cfg.input_dim, cfg.model_dim), rng)
        store.add_zeros("input.b", (cfg.model_dim,))
        store.add_ones("token", (cfg.model_dim,))
        for i in range(cfg.n_layers):
            pre = f"layer{i}."
            store.add_ones(pre + "attn_norm.g", (cfg.model_dim,))
            store.add_zeros(pre + "attn_norm.b", (cfg.model_dim,))
            for nm in ("wq", "wk", "wv", "wo"):
                store.add_glorot(pre + "attn." + nm, (cfg.model_dim, cfg.model_dim), rng)
            for nm in ("bq", "bv", "bo"):
                store.add_zeros(pre + "attn." + nm, (cfg.model_dim,))
            store.add_ones(pre + "ffn_norm.g", (cfg.model_dim,))
            store.add_zeros(pre + "ffn_norm.b", (cfg.model_dim,))
            store.add_glorot(pre + "ffn.w1", (cfg.model_dim, cfg.ffn_dim), rng)
            store.add_zeros(pre + "ffn.b1", (cfg.ffn_dim,))
            store.add_glorot(pre + "ffn.w2", (cfg.ffn_dim, cfg.model_dim), rng)
            store.add_zeros(pre + "ffn.b2", (cfg.model_dim,))
        store.add_ones("final_norm.g", (cfg.model_dim,))
        store.add_zeros("final_norm.b", (cfg.model_dim,))
        store.add_glorot("output.w", (cfg.model_dim, cfg.awe_dim), rng)
        store.add_zeros("output.b", (cfg.awe_dim,))

    def forward_batch(self, p, batch: PaddedBatch) -> Tensor:
        cfg = self.cfg
        self._check_dim(batch.data.shape[2])
        b, t_max = batch.data.shape[0], batch.data.shape[1]

        x = linear(Tensor(batch.data), p["input.w"], p["input.b"])
        tok = broadcast_to(p["token"].reshape(1, 1, cfg.model_dim),
                           (b, 1, cfg.model_dim))
        x = concat([tok, x], axis=1)
        pe = sinusoidal_positions(t_max + 1, cfg.model_dim, batch.data.dtype)
        x = x + pe[None]
        key_mask = np.concatenate(
            [np.ones((b, 1), dtype=bool), batch.valid_mask()], axis=1)

        for i in range(cfg.n_layers):
            pre = f"layer{i}."
            h = layer_norm(x, p[pre + "attn_norm.g"], p[pre + "attn_norm.b"])
            x = x + multi_head_attention(
                h, key_mask,
                p[pre + "attn.wq"], p[pre + "attn.bq"],
                p[pre + "attn.wk"],
                p[pre + "attn.wv"], p[pre + "attn.bv"],
                p[pre + "attn.wo"], p[pre + "attn.bo"],
                cfg.n_heads)
            h = layer_norm(x, p[pre + "ffn_norm.g"], p[pre + "ffn_norm.b"])
            h = linear(gelu(linear(h, p[pre + "ffn.w1"], p[pre + "ffn.b1"])),
                       p[pre + "ffn.w2"], p[pre + "ffn.b2"])
            x = x + h

        x = layer_norm(x, p["final_norm.g"], p["final_norm.b"])
        return linear(x[:, 0], p["output.w"], p["output.b"])


class RnnEmbedder(_TrainableEmbedder):
    """Stacked gated recurrent encoder; the top layer's final state is
    mapped linearly to the embedding."""

    embedder_id = "contrastive-rnn"
    config_cls = RnnConfig

    @classmethod
    def _init_params(cls, cfg, store, rng):
        _init_gru_stack(store, rng, "enc", cfg.n_layers, cfg.input_dim, cfg.hidden_dim)
        store.add_glorot("output.w", (cfg.hidden_dim, cfg.awe_dim), rng)
        store.add_zeros("output.b", (cfg.awe_dim,))

    def forward_batch(self, p, batch: PaddedBatch) -> Tensor:
        cfg = self.cfg
        self._check_dim(batch.data.shape[2])
        _, final = _run_gru_stack(p, Tensor(batch.data), batch.lengths, "enc",
                                  cfg.n_layers, cfg.hidden_dim)
        return linear(final, p["output.w"], p["output.b"])


class CaeRnn(RnnEmbedder):
    """Recurrent encoder-decoder. Encoding reuses the RnnEmbedder pipeline;
    the decoder receives the embedding as input at every step from a zero
    initial state, with a per-step linear readout back to feature space."""

    embedder_id = "cae-rnn"

    @classmethod
    def _init_params(cls, cfg, store, rng):
        super()._init_params(cfg, store, rng)
        _init_gru_stack(store, rng, "dec", cfg.n_layers, cfg.awe_dim, cfg.hidden_dim)
        store.add_glorot("readout.w", (cfg.hidden_dim, cfg.input_dim), rng)
        store.add_zeros("readout.b", (cfg.input_dim,))

    def decode_batch(self, p, awes: Tensor, target_len: int) -> Tensor:
        """Unroll the decoder target_len steps; returns (B, target_len, D)."""
        if target_len < 1:
            raise InvalidLength(f"target_len must be >= 1, got {target_len}")
        cfg = self.cfg
        b = awes.data.shape[0]
        dtype = awes.data.dtype
        states = [awes for _ in range(target_len)]
        for layer in range(cfg.n_layers):
            h = Tensor(np.zeros((b, cfg.hidden_dim), dtype=dtype))
            outputs = []
            for t in range(target_len):
                h = gru_step(states[t], h, p, f"dec{layer}")
                outputs.append(h)
            states = outputs
        rows = [linear(h, p["readout.w"], p["readout.b"]).reshape(b, 1, cfg.input_dim)
                for h in states]
        return concat(rows, axis=1)

    def decode(self, awe, target_len: int) -> np.ndarray:
        """Reconstruct a (target_len, D) feature matrix from one embedding."""
        vec = awe.vector if isinstance(awe, Awe) else np.asarray(awe)
        p = self.store.tensors(requires_grad=False)
        awes = Tensor(vec.astype(self.store.dtype)[None, :])
        return self.decode_batch(p, awes, target_len).data[0]


_TRAINABLE = {
    cls.embedder_id: cls for cls in (TransformerEmbedder, RnnEmbedder, CaeRnn)
}


def make_embedder(embedder_id: str, cfg=None) -> Embedder:
    """Construct a stateless embedder, or a trainable one from an existing
    checkpoint via load_embedder."""
    if embedder_id == "meanpool":
        return MeanpoolEmbedder()
    if embedder_id == "subsample":
        return SubsampleEmbedder(cfg or SubsampleConfig())
    raise ValueError(f"unknown stateless embedder {embedder_id!r}")


def load_embedder(path: str | Path) -> _TrainableEmbedder:
    """Rebuild a trainable embedder from a checkpoint written by save()."""
    store, meta = load_checkpoint(path)
    cls = _TRAINABLE[meta["embedder_id"]]
    cfg = cls.config_cls(**meta["config"])
    return cls(cfg, store)
