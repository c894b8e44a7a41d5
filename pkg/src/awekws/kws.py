"""Query-by-example search: window sweep, embedding, and ranking."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Corpus, FeatureSequence
from .dtw import dtw_search
from .errors import InvalidManifest, ZeroNormEmbedding


@dataclass(frozen=True)
class WindowConfig:
    min_len: int = 10
    max_len: int = 65
    len_step: int = 5
    stride: int = 5

    def __post_init__(self):
        if not (1 <= self.min_len <= self.max_len):
            raise ValueError("need 1 <= min_len <= max_len")
        if self.stride < 1 or self.len_step < 1:
            raise ValueError("stride and len_step must be >= 1")


@dataclass(frozen=True)
class KeywordTemplateSet:
    keyword: str
    templates: tuple

    def __post_init__(self):
        if len(self.templates) < 1:
            raise ValueError(f"keyword {self.keyword!r} has no templates")


@dataclass(frozen=True)
class Detection:
    keyword: str
    utterance_id: str
    score: float
    best_window: tuple[int, int]
    best_template: int


@dataclass(frozen=True)
class RankedDetections:
    """One detection per search utterance, best score first; equal scores
    order by utterance id."""

    keyword: str
    detections: tuple

    def __post_init__(self):
        ordered = tuple(sorted(self.detections,
                               key=lambda d: (-d.score, d.utterance_id)))
        object.__setattr__(self, "detections", ordered)


def template_sets(templates: Corpus) -> list[KeywordTemplateSet]:
    """Group isolated-word template utterances into per-keyword sets by the
    label of each utterance's single word alignment."""
    groups: dict[str, list] = {}
    for uid in templates.utterance_ids():
        seq = templates[uid]
        if not seq.alignments:
            raise InvalidManifest(
                f"template utterance {uid!r} carries no word alignment")
        groups.setdefault(seq.alignments[0].label, []).append(seq)
    return [KeywordTemplateSet(label, tuple(seqs))
            for label, seqs in sorted(groups.items())]


def generate_windows(n_frames: int, cfg: WindowConfig = WindowConfig()) -> list[tuple[int, int]]:
    """(start, length) sweep positions, length-major then start order.
    An utterance shorter than min_len yields the single whole-utterance
    window so it still gets scored."""
    if n_frames < 1:
        raise ValueError("n_frames must be >= 1")
    if n_frames < cfg.min_len:
        return [(0, n_frames)]
    out = []
    for length in range(cfg.min_len, cfg.max_len + 1, cfg.len_step):
        if length > n_frames:
            break
        out.extend((start, length)
                   for start in range(0, n_frames - length + 1, cfg.stride))
    return out


def _unit_rows(mat: np.ndarray, what: str) -> np.ndarray:
    norms = np.linalg.norm(mat, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise ZeroNormEmbedding(f"zero-norm {what} embedding")
    return mat / norms


def _embed_utterance_windows(corpus: Corpus, embedder, cfg: WindowConfig):
    """Embed every window of every utterance once. Windows are grouped by
    length so each embed_batch call sees a rectangular batch.

    Returns [(utterance_id, windows, unit-row AWE matrix)] in corpus order.
    """
    seqs = [corpus[uid] for uid in corpus.utterance_ids()]
    windows = [generate_windows(s.n_frames, cfg) for s in seqs]
    by_length: dict[int, list] = {}
    for ui, (seq, wins) in enumerate(zip(seqs, windows)):
        for wi, (start, length) in enumerate(wins):
            by_length.setdefault(length, []).append(
                (ui, wi, seq.frames[start:start + length]))

    vectors = [[None] * len(w) for w in windows]
    for length in sorted(by_length):
        items = by_length[length]
        embs = embedder.embed_batch([f for _, _, f in items])
        for (ui, wi, _), vec in zip(items, embs):
            vectors[ui][wi] = vec
    return [(seq.utterance_id, wins, _unit_rows(np.stack(vecs), "window"))
            for seq, wins, vecs in zip(seqs, windows, vectors)]


def _best_detection(keyword, uid, windows, win_unit, tmpl_unit) -> Detection:
    sims = tmpl_unit @ win_unit.T
    flat = int(np.argmax(sims))
    ti, wi = divmod(flat, sims.shape[1])
    return Detection(keyword, uid, float(sims[ti, wi]), windows[wi], ti)


def score_keyword(templates: KeywordTemplateSet, utterance: FeatureSequence,
                  embedder, cfg: WindowConfig = WindowConfig()) -> Detection:
    """Max cosine similarity between any template AWE and any window AWE.
    Ties resolve to the lowest template index, then the earliest window."""
    windows = generate_windows(utterance.n_frames, cfg)
    win_embs = embedder.embed_batch(
        [utterance.frames[s:s + l] for s, l in windows])
    tmpl_embs = embedder.embed_batch([t.frames for t in templates.templates])
    return _best_detection(templates.keyword, utterance.utterance_id, windows,
                           _unit_rows(win_embs, "window"),
                           _unit_rows(tmpl_embs, "template"))


def search(keywords, corpus: Corpus, embedder,
           cfg: WindowConfig = WindowConfig()) -> list[RankedDetections]:
    """Score every keyword against every utterance. Window embeddings are
    computed once and shared across keywords."""
    embedded = _embed_utterance_windows(corpus, embedder, cfg)
    out = []
    for kw in keywords:
        tmpl_unit = _unit_rows(
            embedder.embed_batch([t.frames for t in kw.templates]), "template")
        dets = [_best_detection(kw.keyword, uid, wins, win_unit, tmpl_unit)
                for uid, wins, win_unit in embedded]
        out.append(RankedDetections(kw.keyword, tuple(dets)))
    return out


def dtw_search_all(keywords, corpus: Corpus, threads: int = 1) -> list[RankedDetections]:
    """Alignment-based baseline: score = 1 - subsequence alignment cost,
    best template wins. No windowing; the alignment finds the region.
    Utterances are scored independently, so threads > 1 fans them out."""
    seqs = [corpus[uid] for uid in corpus.utterance_ids()]
    out = []
    for kw in keywords:
        def score_one(seq):
            best = None
            best_ti = -1
            for ti, tmpl in enumerate(kw.templates):
                res = dtw_search(tmpl, seq)
                if best is None or res.cost < best.cost:
                    best, best_ti = res, ti
            start, end = best.region
            return Detection(kw.keyword, seq.utterance_id,
                             1.0 - best.cost, (start, end - start), best_ti)

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                dets = list(pool.map(score_one, seqs))
        else:
            dets = [score_one(seq) for seq in seqs]
        out.append(RankedDetections(kw.keyword, tuple(dets)))
    return out


def write_detections(rankings, path) -> None:
    """One JSON line per detection, grouped by keyword in ranked order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        for ranked in rankings:
            for d in ranked.detections:
                fh.write(json.dumps({
                    "keyword": d.keyword,
                    "utterance_id": d.utterance_id,
                    "score": d.score,
                    "window_start": d.best_window[0],
                    "window_len": d.best_window[1],
                    "template_index": d.best_template,
                }, sort_keys=True) + "\n")


def read_detections(path) -> list[RankedDetections]:
    groups: dict[str, list[Detection]] = {}
    with open(path) as fh:
        for line in fh:
            rec = json.loads(line)
            det = Detection(rec["keyword"], rec["utterance_id"], rec["score"],
                            (rec["window_start"], rec["window_len"]),
                            rec["template_index"])
            groups.setdefault(det.keyword, []).append(det)
    return [RankedDetections(kw, tuple(dets)) for kw, dets in groups.items()]
