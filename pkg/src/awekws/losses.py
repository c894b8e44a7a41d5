"""Contrastive and reconstruction objectives, plus same-different scoring."""

from __future__ import annotations

import numpy as np

from .errors import NoSameLabelPairs, ShapeMismatch, ZeroNormEmbedding
from .nn.tensor import Tensor, _as_tensor, exp, log, sqrt


def _row_normalize(t: Tensor, what: str) -> Tensor:
    norms = sqrt((t ** 2).sum(axis=-1, keepdims=True))
    if np.any(norms.data == 0.0):
        raise ZeroNormEmbedding(f"{what} contains a zero-norm embedding")
    return t / norms


def nt_xent_loss(anchor_embs, positive_embs, temperature: float) -> Tensor:
    """Temperature-scaled contrastive loss, summed over the batch.

    Row i is scored against 2N-1 candidates: every positive plus the other
    N-1 anchors. Similarity is cosine. Returns a scalar Tensor; inputs may
    be Tensors (differentiable) or plain arrays.

    L_i = -log[ exp(sim(a_i, p_i)/t) / sum_w exp(sim(a_i, w)/t) ]
    """
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    a = _as_tensor(anchor_embs)
    p = _as_tensor(positive_embs)
    if a.shape != p.shape or a.ndim != 2:
        raise ShapeMismatch(f"expected matching (N, E) batches, got {a.shape} and {p.shape}")
    n = a.shape[0]
    inv_t = 1.0 / temperature

    an = _row_normalize(a, "anchors")
    pn = _row_normalize(p, "positives")
    sim_ap = (an @ pn.transpose((1, 0))) * inv_t
    sim_aa = (an @ an.transpose((1, 0))) * inv_t

    # Constant per-row shift keeps exp in range without touching gradients.
    eye = np.eye(n, dtype=a.data.dtype)
    off_aa = np.where(eye.astype(bool), -np.inf, sim_aa.data)
    shift = np.maximum(sim_ap.data.max(axis=1), off_aa.max(axis=1, initial=-np.inf))

    exp_ap = exp(sim_ap - shift[:, None])
    exp_aa = exp(sim_aa - shift[:, None]) * (1.0 - eye)
    denom = exp_ap.sum(axis=1) + exp_aa.sum(axis=1)
    diag = (sim_ap * eye).sum(axis=1)
    return (log(denom) - (diag - shift)).sum()


def reconstruction_loss(decoded, target) -> Tensor:
    """Mean squared error over every entry of two equal-shape matrices."""
    d = _as_tensor(decoded)
    t = np.asarray(target.data if isinstance(target, Tensor) else target)
    if d.shape != t.shape:
        raise ShapeMismatch(f"decoded {d.shape} vs target {t.shape}")
    return ((d - t) ** 2).mean()


def same_different_ap(vectors: np.ndarray, labels) -> float:
    """Average precision of the all-pairs similarity ranking.

    Every unordered pair of embeddings is scored by cosine similarity and
    ranked descending; a pair is relevant when its labels match. Ties keep
    the enumeration order (i, then j).
    """
    vectors = np.asarray(vectors, dtype=np.float64)
    labels = list(labels)
    m = vectors.shape[0]
    if m < 2 or len(labels) != m:
        raise ValueError("need >= 2 embeddings with one label each")
    norms = np.linalg.norm(vectors, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise ZeroNormEmbedding("zero-norm embedding in same-different input")
    unit = vectors / norms
    sims = unit @ unit.T

    iu, ju = np.triu_indices(m, k=1)
    relevant = np.asarray([labels[i] == labels[j] for i, j in zip(iu, ju)])
    if not relevant.any():
        raise NoSameLabelPairs("no pair of embeddings shares a label")
    order = np.argsort(-sims[iu, ju], kind="stable")
    rel_sorted = relevant[order]
    ranks = np.nonzero(rel_sorted)[0] + 1
    hits = np.arange(1, ranks.size + 1)
    return float(np.mean(hits / ranks))
