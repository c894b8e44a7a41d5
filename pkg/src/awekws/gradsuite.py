"""Finite-difference verification of every differentiable component.

Each case builds a small random instance in f64, computes analytic
gradients by backpropagation, and compares against central differences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embedders import CaeRnn, RnnConfig, RnnEmbedder, TransformerConfig, TransformerEmbedder
from .losses import nt_xent_loss, reconstruction_loss
from .nn.gradcheck import max_relative_error, numeric_gradient
from .nn.layers import PaddedBatch
from .nn.tensor import Tensor

TOLERANCE = 1e-4


@dataclass(frozen=True)
class GradCheckCase:
    target: str
    trial: int
    max_rel_err: float
    worst_entry: str

    @property
    def passed(self) -> bool:
        return self.max_rel_err <= TOLERANCE


def _random_frames(rng, n_seqs, dim, t_max=7) -> list[np.ndarray]:
    return [rng.normal(size=(int(rng.integers(2, t_max)), dim))
            for _ in range(n_seqs)]


def _check_arrays(arrays: dict, analytic_fn, value_fn) -> tuple[float, str]:
    tensors = {k: Tensor(v, requires_grad=True) for k, v in arrays.items()}
    loss = analytic_fn(tensors)
    loss.backward()
    analytic = {k: t.grad for k, t in tensors.items() if t.grad is not None}
    numeric = numeric_gradient(value_fn, arrays)
    return max_relative_error(analytic, numeric)


def check_nt_xent(rng) -> tuple[float, str]:
    n = int(rng.integers(1, 6))
    e = int(rng.integers(2, 8))
    tau = float(rng.uniform(0.1, 1.0))
    arrays = {"a": rng.normal(size=(n, e)), "p": rng.normal(size=(n, e))}
    return _check_arrays(
        arrays,
        lambda t: nt_xent_loss(t["a"], t["p"], tau),
        lambda: float(nt_xent_loss(arrays["a"], arrays["p"], tau).data))


def check_reconstruction(rng) -> tuple[float, str]:
    t, d = int(rng.integers(1, 6)), int(rng.integers(1, 5))
    target = rng.normal(size=(t, d))
    arrays = {"decoded": rng.normal(size=(t, d))}
    return _check_arrays(
        arrays,
        lambda ts: reconstruction_loss(ts["decoded"], target),
        lambda: float(reconstruction_loss(arrays["decoded"], target).data))


def _check_embedder_params(embedder, loss_of) -> tuple[float, str]:
    """Gradients w.r.t. every parameter of an embedder, via a scalar loss."""
    arrays = dict(embedder.store.items())
    p = embedder.store.tensors(requires_grad=True)
    loss = loss_of(p)
    loss.backward()
    analytic = {k: t.grad for k, t in p.items() if t.grad is not None}
    numeric = numeric_gradient(
        lambda: float(loss_of(embedder.store.tensors(False)).data), arrays)
    return max_relative_error(analytic, numeric)


def _contrastive_loss_of(embedder, frames, n_pairs, tau=0.2):
    batch = PaddedBatch.from_frames(frames, dtype=np.float64)

    def loss_of(p):
        embs = embedder.forward_batch(p, batch)
        return nt_xent_loss(embs[:n_pairs], embs[n_pairs:], tau)
    return loss_of


def check_transformer(rng, seed: int) -> tuple[float, str]:
    dim = int(rng.integers(2, 5))
    cfg = TransformerConfig(input_dim=dim, n_layers=int(rng.integers(1, 3)),
                            n_heads=2, model_dim=8, ffn_dim=12, awe_dim=4)
    embedder = TransformerEmbedder.initialize(cfg, seed=seed, dtype=np.float64)
    n_pairs = int(rng.integers(1, 4))
    frames = _random_frames(rng, 2 * n_pairs, dim)
    return _check_embedder_params(embedder,
                                  _contrastive_loss_of(embedder, frames, n_pairs))


def check_rnn(rng, seed: int) -> tuple[float, str]:
    dim = int(rng.integers(2, 5))
    cfg = RnnConfig(input_dim=dim, n_layers=int(rng.integers(1, 3)),
                    hidden_dim=5, awe_dim=4)
    embedder = RnnEmbedder.initialize(cfg, seed=seed, dtype=np.float64)
    n_pairs = int(rng.integers(1, 4))
    frames = _random_frames(rng, 2 * n_pairs, dim)
    return _check_embedder_params(embedder,
                                  _contrastive_loss_of(embedder, frames, n_pairs))


def check_cae(rng, seed: int) -> tuple[float, str]:
    dim = int(rng.integers(2, 5))
    cfg = RnnConfig(input_dim=dim, n_layers=int(rng.integers(1, 3)),
                    hidden_dim=5, awe_dim=4)
    embedder = CaeRnn.initialize(cfg, seed=seed, dtype=np.float64)
    n_seqs = int(rng.integers(1, 4))
    frames = _random_frames(rng, n_seqs, dim)
    t_out = int(rng.integers(2, 6))
    target = rng.normal(size=(n_seqs, t_out, dim))
    batch = PaddedBatch.from_frames(frames, dtype=np.float64)

    def loss_of(p):
        awes = embedder.forward_batch(p, batch)
        return reconstruction_loss(embedder.decode_batch(p, awes, t_out), target)
    return _check_embedder_params(embedder, loss_of)


_TARGETS = {
    "nt_xent_loss": lambda rng, seed: check_nt_xent(rng),
    "reconstruction_loss": lambda rng, seed: check_reconstruction(rng),
    "contrastive-transformer": check_transformer,
    "contrastive-rnn": check_rnn,
    "cae-rnn": check_cae,
}


def run_suite(n_trials: int = 20, seed: int = 0) -> list[GradCheckCase]:
    rng = np.random.default_rng(seed)
    results = []
    for target, fn in _TARGETS.items():
        for trial in range(n_trials):
            err, where = fn(rng, seed + trial)
            results.append(GradCheckCase(target, trial, err, where))
    return results
