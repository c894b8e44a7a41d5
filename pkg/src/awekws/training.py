"""Pair-batch training for the trainable embedders."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass

import numpy as np

from .corpus import WordSegment
from .embedders import CaeRnn, _TrainableEmbedder
from .errors import NoPositivePairsAvailable, NonFiniteLoss
from .losses import nt_xent_loss, reconstruction_loss
from .nn.layers import PaddedBatch
from .nn.optim import Adam

# A batch of all-distinct word types is drawn by rejection; with a sane pair
# list the acceptance rate is high, so a hard cap just guards degenerate data.
_MAX_RESAMPLES = 1000


@dataclass(frozen=True)
class ContrastiveConfig:
    temperature: float = 0.1
    batch_size: int = 8
    steps: int = 5000
    seed: int = 0
    learning_rate: float = 1e-3

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if self.batch_size < 1 or self.steps < 0:
            raise ValueError("batch_size must be >= 1 and steps >= 0")


@dataclass(frozen=True)
class PairBatch:
    """N aligned (anchor, positive) frame matrices with their word types."""

    anchors: list
    positives: list
    labels: list

    def __post_init__(self):
        n = len(self.anchors)
        if n < 1 or len(self.positives) != n or len(self.labels) != n:
            raise ValueError("anchors, positives, labels must align and be nonempty")


def _pair_frames(pair) -> tuple[np.ndarray, np.ndarray, str]:
    a, b = pair
    if isinstance(a, WordSegment):
        return a.frames, b.frames, a.label
    return np.asarray(a[0]), np.asarray(b[0]), a[1] if len(a) > 1 else ""


def _sample_distinct_batch(pairs, labels, n, rng) -> list[int]:
    if len(pairs) < n:
        raise NoPositivePairsAvailable(
            f"need {n} pairs per batch, have {len(pairs)}")
    if len(set(labels)) < n:
        raise NoPositivePairsAvailable(
            f"batch needs {n} distinct word types, pair list has {len(set(labels))}")
    for _ in range(_MAX_RESAMPLES):
        idx = rng.choice(len(pairs), size=n, replace=False)
        chosen = [labels[i] for i in idx]
        if len(set(chosen)) == n:
            return [int(i) for i in idx]
    raise NoPositivePairsAvailable(
        f"could not draw {n} distinct word types in {_MAX_RESAMPLES} tries")


def train(embedder: _TrainableEmbedder, pairs, cfg: ContrastiveConfig,
          log_file=None) -> list[dict]:
    """Run the step budget on ordered (anchor, positive) pairs in place.

    Contrastive embedders get NT-Xent over batches of batch_size distinct
    word types; the encoder-decoder gets per-pair reconstruction error.
    Returns the per-step log records; pass log_file to also stream them as
    JSON lines. Deterministic for a fixed cfg.seed.
    """
    if not pairs:
        raise NoPositivePairsAvailable("empty pair list")
    rng = np.random.default_rng(cfg.seed)
    opt = Adam(embedder.store, lr=cfg.learning_rate)
    reconstructive = isinstance(embedder, CaeRnn)
    anchors_all, positives_all, labels_all = zip(*map(_pair_frames, pairs))

    records = []
    start = time.monotonic()
    for step in range(cfg.steps):
        if reconstructive:
            idx = [int(i) for i in rng.choice(len(pairs), size=cfg.batch_size)]
        else:
            idx = _sample_distinct_batch(pairs, labels_all, cfg.batch_size, rng)

        p = embedder.store.tensors(requires_grad=True)
        if reconstructive:
            batch = PaddedBatch.from_frames(
                [anchors_all[i] for i in idx], dtype=embedder.store.dtype)
            awes = embedder.forward_batch(p, batch)
            targets = [positives_all[i] for i in idx]
            t_max = max(t.shape[0] for t in targets)
            decoded = embedder.decode_batch(p, awes, t_max)
            per_pair = [reconstruction_loss(decoded[row, :t.shape[0]], t)
                        for row, t in enumerate(targets)]
            loss = per_pair[0]
            for term in per_pair[1:]:
                loss = loss + term
            loss = loss * (1.0 / len(per_pair))
        else:
            both = PaddedBatch.from_frames(
                [anchors_all[i] for i in idx] + [positives_all[i] for i in idx],
                dtype=embedder.store.dtype)
            embs = embedder.forward_batch(p, both)
            loss = nt_xent_loss(embs[:cfg.batch_size], embs[cfg.batch_size:],
                                cfg.temperature)

        value = float(loss.data)
        if not np.isfinite(value):
            raise NonFiniteLoss(f"step {step}: loss is {value}")
        loss.backward()
        scale = 1.0 / cfg.batch_size
        grads = {name: t.grad * scale for name, t in p.items() if t.grad is not None}
        opt.step(grads)

        record = {"step": step, "loss": value,
                  "wall_time": round(time.monotonic() - start, 6)}
        records.append(record)
        if log_file is not None:
            log_file.write(json.dumps(record) + "\n")
    return records
