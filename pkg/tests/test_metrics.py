"""Ranking metrics against a threshold-sweep counting oracle."""

import numpy as np
import pytest

from awekws.errors import NoKeywordsSurviveFilter, NoRelevantUtterances
from awekws.kws import Detection, RankedDetections
from awekws.metrics import (
    GroundTruth,
    average_precision,
    evaluate,
    precision_at,
    report_to_json,
    report_to_table,
    write_report,
)


def sweep_ap(ranked: RankedDetections, truth: GroundTruth) -> float:
    """Sweep a threshold over the raw scores; at each relevant detection's
    own score, precision counts every detection at or above it."""
    relevant_ids = truth.relevant(ranked.keyword)
    scores = [d.score for d in ranked.detections]
    precisions = []
    for det in ranked.detections:
        if det.utterance_id not in relevant_ids:
            continue
        kept = [d for d, s in zip(ranked.detections, scores) if s >= det.score]
        tp = sum(1 for d in kept if d.utterance_id in relevant_ids)
        precisions.append(tp / len(kept))
    return float(np.mean(precisions))


def sweep_p_at(ranked: RankedDetections, truth: GroundTruth, cutoff: int) -> float:
    relevant_ids = truth.relevant(ranked.keyword)
    scores = sorted((d.score for d in ranked.detections), reverse=True)
    if len(scores) >= cutoff:
        threshold = scores[cutoff - 1]
        tp = sum(1 for d in ranked.detections
                 if d.score >= threshold and d.utterance_id in relevant_ids)
    else:
        tp = sum(1 for d in ranked.detections if d.utterance_id in relevant_ids)
    return tp / cutoff


def _random_ranking(rng, keyword="kw"):
    n = int(rng.integers(1, 41))
    ids = [f"utt{i:03d}" for i in range(n)]
    scores = rng.permutation(n) / n + rng.random() * 0.01  # all distinct
    dets = tuple(Detection(keyword, uid, float(s), (0, 10), 0)
                 for uid, s in zip(ids, scores))
    n_rel = int(rng.integers(1, n + 1))
    relevant = list(rng.choice(ids, size=n_rel, replace=False))
    # occasionally the truth knows utterances the search never ranked
    if rng.random() < 0.3:
        relevant += [f"missing{i}" for i in range(int(rng.integers(1, 4)))]
    truth = GroundTruth({keyword: relevant})
    return RankedDetections(keyword, dets), truth


def test_metrics_match_threshold_sweep_oracle():
    rng = np.random.default_rng(0)
    for trial in range(500):
        ranked, truth = _random_ranking(rng)
        ap = average_precision(ranked, truth)
        assert abs(ap - sweep_ap(ranked, truth)) <= 1e-12, f"trial {trial}"
        n_rel = len(truth.relevant("kw"))
        for cutoff in (10, n_rel):
            got, _ = precision_at(ranked, truth, cutoff)
            assert abs(got - sweep_p_at(ranked, truth, cutoff)) <= 1e-12, (
                f"trial {trial} cutoff {cutoff}")


def test_perfect_and_inverted_rankings():
    dets = tuple(Detection("kw", f"u{i}", 1.0 - i / 10.0, (0, 5), 0)
                 for i in range(6))
    top_truth = GroundTruth({"kw": ["u0", "u1", "u2"]})
    bottom_truth = GroundTruth({"kw": ["u3", "u4", "u5"]})
    ranked = RankedDetections("kw", dets)
    assert average_precision(ranked, top_truth) == 1.0
    want = np.mean([1 / 4, 2 / 5, 3 / 6])
    assert abs(average_precision(ranked, bottom_truth) - want) <= 1e-12


def test_precision_at_truncation_keeps_requested_denominator():
    dets = tuple(Detection("kw", f"u{i}", 1.0 - i / 10.0, (0, 5), 0)
                 for i in range(4))
    truth = GroundTruth({"kw": ["u0", "u1", "u2", "u3"]})
    value, truncated = precision_at(RankedDetections("kw", dets), truth, 10)
    assert truncated
    assert abs(value - 4 / 10) <= 1e-12
    value, truncated = precision_at(RankedDetections("kw", dets), truth, 4)
    assert not truncated and value == 1.0
    with pytest.raises(ValueError):
        precision_at(RankedDetections("kw", dets), truth, 0)


def test_missing_truth_raises():
    dets = (Detection("kw", "u0", 0.5, (0, 5), 0),)
    with pytest.raises(NoRelevantUtterances):
        average_precision(RankedDetections("kw", dets), GroundTruth({"kw": []}))


def _world(rng, occurrence_counts):
    """One ranking per keyword over a shared utterance pool."""
    ids = [f"utt{i:03d}" for i in range(30)]
    rankings, truth = [], {}
    for k, n_rel in enumerate(occurrence_counts):
        kw = f"kw{k}"
        scores = rng.permutation(len(ids)) / len(ids)
        rankings.append(RankedDetections(kw, tuple(
            Detection(kw, uid, float(s), (0, 10), 0)
            for uid, s in zip(ids, scores))))
        truth[kw] = list(rng.choice(ids, size=n_rel, replace=False))
    return rankings, GroundTruth(truth)


def test_evaluate_filters_sparse_keywords_from_means():
    rng = np.random.default_rng(1)
    rankings, truth = _world(rng, [12, 15, 3])
    report = evaluate(rankings, truth)
    assert report.kept_keywords == ("kw0", "kw1")
    assert len(report.per_keyword) == 3  # sparse keyword still listed
    kept = [m for m in report.per_keyword if m.kept]
    assert abs(report.mean_ap - np.mean([m.ap for m in kept])) <= 1e-12
    sparse = next(m for m in report.per_keyword if m.keyword == "kw2")
    assert not sparse.kept and sparse.n_relevant == 3


def test_evaluate_requires_a_surviving_keyword():
    rng = np.random.default_rng(2)
    rankings, truth = _world(rng, [2, 3])
    with pytest.raises(NoKeywordsSurviveFilter):
        evaluate(rankings, truth)
    report = evaluate(rankings, truth, min_occurrences=2)
    assert report.kept_keywords == ("kw0", "kw1")


def test_report_bytes_are_deterministic_and_parse(tmp_path):
    rng = np.random.default_rng(3)
    rankings, truth = _world(rng, [12, 11])
    a = report_to_json(evaluate(rankings, truth))
    b = report_to_json(evaluate(rankings, truth))
    assert a == b
    table = report_to_table(evaluate(rankings, truth))
    assert table.splitlines()[0].startswith("keyword\t")
    assert table.splitlines()[-1].startswith("MEAN\t")
    write_report(evaluate(rankings, truth), tmp_path / "r.json", tmp_path / "r.tsv")
    assert (tmp_path / "r.json").read_bytes() == a


def test_ground_truth_round_trip(tmp_path):
    truth = GroundTruth({"kw0": ["u1", "u0"], "kw1": ["u2"]})
    truth.save(tmp_path / "truth.json")
    back = GroundTruth.load(tmp_path / "truth.json")
    assert back.relevant("kw0") == frozenset({"u0", "u1"})
    assert back.relevant("kw1") == frozenset({"u2"})
    assert back.relevant("absent") == frozenset()
