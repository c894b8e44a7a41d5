"""Ranking metrics: per-keyword AP, P@10, P@N, and filtered aggregates."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import NoKeywordsSurviveFilter, NoRelevantUtterances
from .kws import RankedDetections

MIN_OCCURRENCES = 10


@dataclass(frozen=True)
class GroundTruth:
    """keyword -> ids of utterances that truly contain it."""

    occurrences: dict

    def __post_init__(self):
        object.__setattr__(self, "occurrences",
                           {k: frozenset(v) for k, v in self.occurrences.items()})

    def relevant(self, keyword: str) -> frozenset:
        return self.occurrences.get(keyword, frozenset())

    @classmethod
    def load(cls, path) -> "GroundTruth":
        with open(path) as fh:
            return cls(json.load(fh))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump({k: sorted(v) for k, v in sorted(self.occurrences.items())},
                      fh, sort_keys=True, indent=2)


@dataclass(frozen=True)
class KeywordMetrics:
    keyword: str
    ap: float
    p_at_10: float
    p_at_n: float
    n_relevant: int
    truncated: bool
    kept: bool


@dataclass(frozen=True)
class MetricsReport:
    per_keyword: tuple
    mean_ap: float
    mean_p_at_10: float
    mean_p_at_n: float
    kept_keywords: tuple


def _relevance(ranked: RankedDetections, truth: GroundTruth) -> np.ndarray:
    relevant_ids = truth.relevant(ranked.keyword)
    if not relevant_ids:
        raise NoRelevantUtterances(
            f"keyword {ranked.keyword!r} has no relevant utterances")
    return np.asarray([d.utterance_id in relevant_ids for d in ranked.detections])


def average_precision(ranked: RankedDetections, truth: GroundTruth) -> float:
    """Mean of precision taken at each relevant rank of the detection list."""
    rel = _relevance(ranked, truth)
    ranks = np.nonzero(rel)[0] + 1
    hits = np.arange(1, ranks.size + 1)
    return float(np.mean(hits / ranks))


def precision_at(ranked: RankedDetections, truth: GroundTruth,
                 cutoff: int) -> tuple[float, bool]:
    """Fraction of the top-cutoff detections that are relevant.

    A ranking shorter than the cutoff is scored over its full length and
    flagged truncated; the denominator stays the requested cutoff.
    """
    if cutoff < 1:
        raise ValueError("cutoff must be >= 1")
    rel = _relevance(ranked, truth)
    truncated = rel.size < cutoff
    return float(rel[:cutoff].sum() / cutoff), truncated


def evaluate(rankings, truth: GroundTruth,
             min_occurrences: int = MIN_OCCURRENCES) -> MetricsReport:
    """Score every ranking with truth coverage; aggregate over keywords
    whose true occurrence count meets min_occurrences. Sparse keywords are
    listed but excluded from the means."""
    per_keyword = []
    for ranked in sorted(rankings, key=lambda r: r.keyword):
        n_relevant = len(truth.relevant(ranked.keyword))
        if n_relevant == 0:
            continue
        ap = average_precision(ranked, truth)
        p10, trunc10 = precision_at(ranked, truth, 10)
        pn, trunc_n = precision_at(ranked, truth, n_relevant)
        per_keyword.append(KeywordMetrics(
            ranked.keyword, ap, p10, pn, n_relevant,
            truncated=trunc10 or trunc_n,
            kept=n_relevant >= min_occurrences))

    kept = [m for m in per_keyword if m.kept]
    if not kept:
        raise NoKeywordsSurviveFilter(
            f"no keyword has {min_occurrences}+ relevant utterances")
    return MetricsReport(
        per_keyword=tuple(per_keyword),
        mean_ap=float(np.mean([m.ap for m in kept])),
        mean_p_at_10=float(np.mean([m.p_at_10 for m in kept])),
        mean_p_at_n=float(np.mean([m.p_at_n for m in kept])),
        kept_keywords=tuple(m.keyword for m in kept),
    )


def report_to_json(report: MetricsReport) -> bytes:
    payload = {
        "aggregate": {
            "map": report.mean_ap,
            "mean_p_at_10": report.mean_p_at_10,
            "mean_p_at_n": report.mean_p_at_n,
            "kept_keywords": list(report.kept_keywords),
        },
        "per_keyword": [{
            "keyword": m.keyword,
            "ap": m.ap,
            "p_at_10": m.p_at_10,
            "p_at_n": m.p_at_n,
            "n_relevant": m.n_relevant,
            "truncated": m.truncated,
            "kept": m.kept,
        } for m in report.per_keyword],
    }
    return (json.dumps(payload, sort_keys=True, indent=2) + "\n").encode()


def report_to_table(report: MetricsReport) -> str:
    lines = ["keyword\tap\tp_at_10\tp_at_n\tn_relevant"]
    lines.extend(
        f"{m.keyword}\t{m.ap:.6f}\t{m.p_at_10:.6f}\t{m.p_at_n:.6f}\t{m.n_relevant}"
        for m in report.per_keyword)
    lines.append(f"MEAN\t{report.mean_ap:.6f}\t{report.mean_p_at_10:.6f}"
                 f"\t{report.mean_p_at_n:.6f}\t{len(report.kept_keywords)}")
    return "\n".join(lines) + "\n"


def write_report(report: MetricsReport, json_path, table_path=None) -> None:
    Path(json_path).write_bytes(report_to_json(report))
    if table_path is not None:
        Path(table_path).write_text(report_to_table(report))
