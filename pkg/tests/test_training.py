"""Training loop behavior: determinism, optimization progress, logging."""

import io
import json

import numpy as np
import pytest

from awekws.embedders import (
    CaeRnn,
    RnnConfig,
    TransformerConfig,
    TransformerEmbedder,
)
from awekws.errors import NoPositivePairsAvailable
from awekws.training import ContrastiveConfig, PairBatch, train


def _toy_pairs(rng, n_types=6, per_type=4, dim=5):
    """Ordered same-type pairs of noisy copies of fixed prototypes."""
    protos = [rng.normal(size=(int(rng.integers(5, 11)), dim)) for _ in range(n_types)]
    insts = {}
    for k, proto in enumerate(protos):
        insts[f"w{k}"] = [(proto + 0.1 * rng.normal(size=proto.shape), f"w{k}")
                          for _ in range(per_type)]
    return [(a, b) for group in insts.values() for a in group for b in group
            if a is not b]


def _toy_transformer():
    cfg = TransformerConfig(input_dim=5, n_layers=1, n_heads=2,
                            model_dim=8, ffn_dim=16, awe_dim=8)
    return TransformerEmbedder.initialize(cfg, seed=0)


def test_training_reduces_contrastive_loss():
    rng = np.random.default_rng(0)
    pairs = _toy_pairs(rng)
    embedder = _toy_transformer()
    records = train(embedder, pairs,
                    ContrastiveConfig(steps=120, batch_size=4, seed=0,
                                      learning_rate=3e-3))
    assert len(records) == 120
    head = np.mean([r["loss"] for r in records[:10]])
    tail = np.mean([r["loss"] for r in records[-10:]])
    assert tail < head * 0.5, f"loss {head:.3f} -> {tail:.3f}"


def test_training_is_deterministic_for_a_seed():
    rng = np.random.default_rng(1)
    pairs = _toy_pairs(rng)
    outcomes = []
    for _ in range(2):
        embedder = _toy_transformer()
        records = train(embedder, pairs,
                        ContrastiveConfig(steps=25, batch_size=4, seed=7))
        outcomes.append((tuple(r["loss"] for r in records),
                         {n: embedder.store.get(n).copy()
                          for n in embedder.store.names()}))
    assert outcomes[0][0] == outcomes[1][0]
    for name in outcomes[0][1]:
        assert np.array_equal(outcomes[0][1][name], outcomes[1][1][name])


def test_training_streams_jsonl_log():
    rng = np.random.default_rng(2)
    pairs = _toy_pairs(rng, n_types=4)
    sink = io.StringIO()
    records = train(_toy_transformer(), pairs,
                    ContrastiveConfig(steps=5, batch_size=3, seed=0),
                    log_file=sink)
    lines = [json.loads(line) for line in sink.getvalue().splitlines()]
    assert lines == records
    assert all(set(r) == {"step", "loss", "wall_time"} for r in lines)


def test_cae_training_reduces_reconstruction_error():
    rng = np.random.default_rng(3)
    pairs = _toy_pairs(rng, n_types=3, per_type=3)
    cfg = RnnConfig(input_dim=5, n_layers=1, hidden_dim=8, awe_dim=6)
    embedder = CaeRnn.initialize(cfg, seed=0)
    records = train(embedder, pairs,
                    ContrastiveConfig(steps=80, batch_size=4, seed=0,
                                      learning_rate=5e-3))
    head = np.mean([r["loss"] for r in records[:10]])
    tail = np.mean([r["loss"] for r in records[-10:]])
    assert tail < head


def test_batches_need_enough_distinct_types():
    rng = np.random.default_rng(4)
    pairs = _toy_pairs(rng, n_types=2)
    with pytest.raises(NoPositivePairsAvailable):
        train(_toy_transformer(), pairs,
              ContrastiveConfig(steps=1, batch_size=4, seed=0))
    with pytest.raises(NoPositivePairsAvailable):
        train(_toy_transformer(), [], ContrastiveConfig(steps=1, seed=0))


def test_config_and_pair_batch_validation():
    with pytest.raises(ValueError):
        ContrastiveConfig(temperature=0.0)
    with pytest.raises(ValueError):
        ContrastiveConfig(batch_size=0)
    with pytest.raises(ValueError):
        PairBatch(anchors=[np.ones((2, 2))], positives=[], labels=["w"])


def test_zero_steps_is_a_no_op():
    rng = np.random.default_rng(5)
    pairs = _toy_pairs(rng, n_types=4)
    embedder = _toy_transformer()
    before = {n: embedder.store.get(n).copy() for n in embedder.store.names()}
    records = train(embedder, pairs, ContrastiveConfig(steps=0, batch_size=3, seed=0))
    assert records == []
    for name, arr in before.items():
        assert np.array_equal(embedder.store.get(name), arr)
