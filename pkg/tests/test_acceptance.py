"""End-to-end acceptance checks.

Each test prints one PASS/FAIL line for its criterion via record_criterion;
conftest replays the lines in the terminal summary. Oracles here are kept
self-contained on purpose, independent of the other test modules.
"""

import math
import time

import numpy as np
import pytest

from awekws.corpus import Corpus, FeatureSequence, NormalizationScope, normalize
from awekws.dtw import cosine_distance_matrix, dtw_cost, dtw_search
from awekws.embedders import (
    MeanpoolEmbedder,
    SubsampleConfig,
    TransformerConfig,
    TransformerEmbedder,
    subsample,
)
from awekws.gradsuite import TOLERANCE, run_suite
from awekws.kws import Detection, RankedDetections, WindowConfig, generate_windows, search
from awekws.losses import nt_xent_loss, same_different_ap
from awekws.metrics import GroundTruth, average_precision, evaluate, precision_at, report_to_json
from awekws.synthetic import SyntheticSpec, make_synthetic
from awekws.training import ContrastiveConfig, train


def test_gradient_suite_all_components(record_criterion):
    """Analytic gradients match central finite differences to 1e-4."""
    t0 = time.monotonic()
    cases = run_suite(n_trials=20, seed=0)
    elapsed = time.monotonic() - t0
    worst = max(cases, key=lambda c: c.max_rel_err)
    targets = {c.target for c in cases}
    ok = (all(c.passed for c in cases) and elapsed < 120.0
          and targets == {"nt_xent_loss", "reconstruction_loss",
                          "contrastive-transformer", "contrastive-rnn", "cae-rnn"})
    record_criterion(
        "gradient-suite", ok,
        f"{len(cases)} cases, worst {worst.max_rel_err:.2e} <= {TOLERANCE} "
        f"at {worst.target}, {elapsed:.1f}s")
    assert ok


def _nt_xent_by_the_letter(anchors, positives, tau):
    n = anchors.shape[0]
    ua = anchors / np.linalg.norm(anchors, axis=1, keepdims=True)
    up = positives / np.linalg.norm(positives, axis=1, keepdims=True)
    total = 0.0
    for i in range(n):
        numer = math.exp(float(ua[i] @ up[i]) / tau)
        denom = sum(math.exp(float(ua[i] @ up[j]) / tau) for j in range(n))
        denom += sum(math.exp(float(ua[i] @ ua[j]) / tau)
                     for j in range(n) if j != i)
        total += -math.log(numer / denom)
    return total


def test_nt_xent_exactness(record_criterion):
    """Vectorized loss equals the unvectorized transcription within 1e-10."""
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 9))
        e = int(rng.integers(2, 10))
        tau = float(rng.uniform(0.1, 1.5))
        a, p = rng.normal(size=(n, e)), rng.normal(size=(n, e))
        got = float(nt_xent_loss(a, p, tau).data)
        worst = max(worst, abs(got - _nt_xent_by_the_letter(a, p, tau)))
    single = float(nt_xent_loss(rng.normal(size=(1, 4)),
                                rng.normal(size=(1, 4)), 0.3).data)
    eye = np.eye(2)
    hand = float(nt_xent_loss(eye, eye.copy(), 1.0).data)
    hand_err = abs(hand - 2.0 * math.log(1.0 + 2.0 / math.e))
    ok = worst <= 1e-10 and single == 0.0 and hand_err <= 1e-12
    record_criterion(
        "nt-xent-exactness", ok,
        f"100 batches worst {worst:.2e}, N=1 -> {single}, "
        f"N=2 hand case {hand:.7f} vs 2 ln(1+2/e), err {hand_err:.2e}")
    assert ok


def _cheapest_path_by_enumeration(d, free_ends):
    ta, tb = d.shape
    best = [np.inf]

    def extend(i, j, total, length):
        total += d[i, j]
        length += 1
        if i == ta - 1 and (free_ends or j == tb - 1):
            best[0] = min(best[0], total / length)
        if i + 1 < ta and j + 1 < tb:
            extend(i + 1, j + 1, total, length)
        if i + 1 < ta:
            extend(i + 1, j, total, length)
        if j + 1 < tb:
            extend(i, j + 1, total, length)

    for j0 in range(tb if free_ends else 1):
        extend(0, j0, 0.0, 0)
    return best[0]


def test_dtw_exhaustive_oracle(record_criterion):
    """Alignment costs equal brute-force path enumeration exactly."""
    rng = np.random.default_rng(1)
    t0 = time.monotonic()
    worst = 0.0
    for _ in range(200):
        a = rng.normal(size=(int(rng.integers(1, 7)), int(rng.integers(1, 5))))
        b = rng.normal(size=(int(rng.integers(1, 7)), a.shape[1]))
        d = cosine_distance_matrix(a, b)
        worst = max(worst, abs(dtw_cost(a, b).cost
                               - _cheapest_path_by_enumeration(d, False)))
        worst = max(worst, abs(dtw_search(a, b).cost
                               - _cheapest_path_by_enumeration(d, True)))
    elapsed = time.monotonic() - t0
    ok = worst <= 1e-12 and elapsed < 60.0
    record_criterion("dtw-oracle", ok,
                     f"200 instances worst {worst:.2e}, {elapsed:.1f}s")
    assert ok


def _sweep_ap(ranked, truth):
    relevant = truth.relevant(ranked.keyword)
    precisions = []
    for det in ranked.detections:
        if det.utterance_id not in relevant:
            continue
        kept = [d for d in ranked.detections if d.score >= det.score]
        precisions.append(
            sum(1 for d in kept if d.utterance_id in relevant) / len(kept))
    return float(np.mean(precisions))


def _sweep_p_at(ranked, truth, cutoff):
    relevant = truth.relevant(ranked.keyword)
    scores = sorted((d.score for d in ranked.detections), reverse=True)
    if len(scores) >= cutoff:
        tp = sum(1 for d in ranked.detections
                 if d.score >= scores[cutoff - 1]
                 and d.utterance_id in relevant)
    else:
        tp = sum(1 for d in ranked.detections if d.utterance_id in relevant)
    return tp / cutoff


def test_metric_threshold_sweep_oracle(record_criterion):
    """AP and precision cutoffs equal threshold-sweep counting exactly."""
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(500):
        n = int(rng.integers(1, 41))
        ids = [f"u{i:03d}" for i in range(n)]
        scores = rng.permutation(n) / n
        dets = tuple(Detection("kw", uid, float(s), (0, 10), 0)
                     for uid, s in zip(ids, scores))
        n_rel = int(rng.integers(1, n + 1))
        truth = GroundTruth({"kw": list(rng.choice(ids, size=n_rel, replace=False))})
        ranked = RankedDetections("kw", dets)
        worst = max(worst, abs(average_precision(ranked, truth)
                               - _sweep_ap(ranked, truth)))
        for cutoff in (10, n_rel):
            got, _ = precision_at(ranked, truth, cutoff)
            worst = max(worst, abs(got - _sweep_p_at(ranked, truth, cutoff)))
    ok = worst <= 1e-12
    record_criterion("metric-oracle", ok, f"500 rankings worst {worst:.2e}")
    assert ok


def test_window_enumeration_closed_form(record_criterion):
    """Window counts match the closed form for every T up to 200."""
    cfg = WindowConfig()
    bad = []
    for t in range(1, 201):
        lengths = [L for L in range(cfg.min_len, cfg.max_len + 1, cfg.len_step)
                   if L <= t]
        want = (sum((t - L) // cfg.stride + 1 for L in lengths)
                if lengths else 1)  # below min_len: one whole-utterance window
        if len(generate_windows(t, cfg)) != want:
            bad.append(t)
    n30 = len(generate_windows(30, cfg))
    ok = not bad and n30 == 15
    record_criterion("window-enumeration", ok,
                     f"T=1..200 mismatches {bad or 'none'}, T=30 -> {n30}")
    assert ok


@pytest.fixture(scope="module")
def e2e():
    """Train, search, and evaluate twice at the pinned synthetic scale."""
    spec = SyntheticSpec()  # 20 types, D=16, T in [20, 60], 200 utterances
    model = TransformerConfig(input_dim=spec.dim, n_layers=3, n_heads=16,
                              model_dim=64, ffn_dim=256, awe_dim=256)

    def one_run():
        bundle = make_synthetic(spec, seed=3)
        embedder = TransformerEmbedder.initialize(model, seed=0)
        train(embedder, bundle.train_pairs,
              ContrastiveConfig(steps=5000, batch_size=4, seed=0))
        vectors = embedder.embed_batch([f for f, _ in bundle.heldout])
        ap = same_different_ap(vectors, [label for _, label in bundle.heldout])
        report = evaluate(search(bundle.keywords, bundle.search, embedder),
                          bundle.truth)
        meanpool_report = evaluate(
            search(bundle.keywords, bundle.search, MeanpoolEmbedder()),
            bundle.truth)
        return ap, report, meanpool_report

    t0 = time.monotonic()
    first = one_run()
    second = one_run()
    elapsed = time.monotonic() - t0
    return first, second, elapsed


def test_synthetic_end_to_end(e2e, record_criterion):
    (ap, report, meanpool_report), (ap2, report2, _), elapsed = e2e
    same_bytes = (report_to_json(report) == report_to_json(report2)
                  and ap == ap2)
    ok = (ap >= 0.90 and report.mean_ap >= 0.80
          and report.mean_ap > meanpool_report.mean_ap
          and same_bytes and elapsed < 20 * 60)
    record_criterion(
        "synthetic-end-to-end", ok,
        f"heldout AP {ap:.4f} >= 0.90, MAP {report.mean_ap:.4f} >= 0.80 "
        f"and > meanpool {meanpool_report.mean_ap:.4f}, "
        f"rerun identical: {same_bytes}, {elapsed / 60:.1f} min < 20 min")
    assert ok


def test_subsample_dimension_with_wide_features(record_criterion):
    """Ten equally spaced 768-dim frames concatenate to 7680 dims."""
    rng = np.random.default_rng(3)
    dims = {subsample(rng.normal(size=(t, 768)).astype(np.float32),
                      SubsampleConfig(k=10)).vector.shape[0]
            for t in (5, 37, 200)}
    ok = dims == {7680}
    record_criterion("subsample-shape", ok, f"output dims {sorted(dims)}")
    assert ok


def test_normalization_statistics(record_criterion):
    """Per-utterance normalization hits mean 0, variance 1 per dimension."""
    rng = np.random.default_rng(4)
    seqs = [FeatureSequence(f"u{i}", f"s{i % 3}",
                            (rng.normal(size=(int(rng.integers(20, 80)), 12))
                             * rng.uniform(0.5, 4.0) + rng.normal()).astype(np.float32))
            for i in range(10)]
    out = normalize(Corpus(seqs), NormalizationScope("per-utterance"))
    worst_mu, worst_var = 0.0, 0.0
    for seq in out:
        frames = seq.frames.astype(np.float64)
        worst_mu = max(worst_mu, float(np.abs(frames.mean(axis=0)).max()))
        worst_var = max(worst_var, float(np.abs(frames.var(axis=0) - 1.0).max()))
    ok = worst_mu <= 1e-6 and worst_var <= 1e-5
    record_criterion("normalization", ok,
                     f"max |mean| {worst_mu:.2e}, max |var-1| {worst_var:.2e}")
    assert ok
