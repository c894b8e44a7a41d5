"""Feature corpus interchange format: manifest + raw float32 files.

A corpus is a JSONL manifest (one record per utterance, fields: id, speaker,
n_frames, dim, path, optional words) next to one raw binary file per
utterance holding row-major little-endian float32 frames, no header.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import (
    AlignmentOutOfRange,
    DimensionMismatch,
    EmptyScopeGroup,
    InconsistentFeatureDim,
    InvalidManifest,
    MissingFile,
    NoPositivePairsAvailable,
    NonFiniteValue,
    OddPairCountRequested,
)

MANIFEST_NAME = "manifest.jsonl"


@dataclass(frozen=True)
class WordAlignment:
    label: str
    start: int  # frame index, inclusive
    end: int    # frame index, exclusive


@dataclass
class FeatureSequence:
    """A variable-length matrix of per-frame feature vectors with metadata."""

    utterance_id: str
    speaker_id: str
    frames: np.ndarray  # (T, D) float32
    sample_period: float = 0.02  # seconds per frame, metadata only
    alignments: tuple[WordAlignment, ...] = ()

    def __post_init__(self):
        self.frames = np.ascontiguousarray(self.frames, dtype=np.float32)
        if self.frames.ndim != 2 or self.frames.shape[0] < 1 or self.frames.shape[1] < 1:
            raise InvalidManifest(
                f"utterance {self.utterance_id!r}: frames must be a TxD matrix "
                f"with T,D >= 1, got shape {self.frames.shape}"
            )
        if not np.isfinite(self.frames).all():
            raise NonFiniteValue(f"utterance {self.utterance_id!r} contains non-finite values")
        for a in self.alignments:
            if not (0 <= a.start < a.end <= self.n_frames):
                raise AlignmentOutOfRange(
                    f"utterance {self.utterance_id!r}: alignment {a.label!r} "
                    f"[{a.start},{a.end}) outside [0,{self.n_frames})"
                )

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def dim(self) -> int:
        return self.frames.shape[1]


@dataclass(frozen=True)
class WordSegment:
    """One aligned word occurrence cut out of an utterance."""

    source: str
    label: str
    start_frame: int
    end_frame: int
    frames: np.ndarray  # (end-start, D), a copy

    @property
    def n_frames(self) -> int:
        return self.end_frame - self.start_frame


@dataclass(frozen=True)
class NormalizationScope:
    """How mean/variance statistics are pooled before normalization."""

    mode: str  # "per-utterance" | "per-speaker" | "none"
    epsilon: float = 1e-8

    MODES = ("per-utterance", "per-speaker", "none")

    def __post_init__(self):
        if self.mode not in self.MODES:
            raise ValueError(f"unknown normalization mode {self.mode!r}")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")


class Corpus:
    """An ordered, immutable collection of FeatureSequence with constant D."""

    def __init__(self, sequences: Sequence[FeatureSequence]):
        self.sequences = list(sequences)
        seen = set()
        for seq in self.sequences:
            if seq.utterance_id in seen:
                raise InvalidManifest(f"duplicate utterance id {seq.utterance_id!r}")
            seen.add(seq.utterance_id)
        dims = {seq.dim for seq in self.sequences}
        if len(dims) > 1:
            raise InconsistentFeatureDim(f"feature dims vary across corpus: {sorted(dims)}")
        self._by_id = {seq.utterance_id: seq for seq in self.sequences}

    def __len__(self) -> int:
        return len(self.sequences)

    def __iter__(self) -> Iterator[FeatureSequence]:
        return iter(self.sequences)

    def __getitem__(self, utterance_id: str) -> FeatureSequence:
        return self._by_id[utterance_id]

    @property
    def dim(self) -> int:
        if not self.sequences:
            raise EmptyScopeGroup("corpus is empty")
        return self.sequences[0].dim

    def utterance_ids(self) -> list[str]:
        return [seq.utterance_id for seq in self.sequences]


def _parse_words(record: dict, utterance_id: str) -> tuple[WordAlignment, ...]:
    words = record.get("words")
    if words is None:
        return ()
    out = []
    for w in words:
        try:
            out.append(WordAlignment(label=str(w["label"]), start=int(w["start"]), end=int(w["end"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidManifest(f"utterance {utterance_id!r}: bad words entry {w!r}") from exc
    return tuple(out)


def load_corpus(manifest_path: str | Path) -> Corpus:
    """Load a corpus from a JSONL manifest, validating every invariant.

    Raises:
        MissingFile: manifest or a referenced feature file does not exist.
        DimensionMismatch: a feature file's byte length is not 4*n_frames*dim.
        InconsistentFeatureDim: dim varies between records.
        NonFiniteValue: a feature file contains NaN or inf.
    """
    manifest_path = Path(manifest_path)
    if not manifest_path.is_file():
        raise MissingFile(f"manifest not found: {manifest_path}")
    root = manifest_path.parent

    sequences = []
    for lineno, line in enumerate(manifest_path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise InvalidManifest(f"{manifest_path}:{lineno}: not valid JSON") from exc
        try:
            utt_id = str(record["id"])
            speaker = str(record["speaker"])
            n_frames = int(record["n_frames"])
            dim = int(record["dim"])
            rel_path = str(record["path"])
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidManifest(f"{manifest_path}:{lineno}: missing or bad field ({exc})") from exc
        if n_frames < 1 or dim < 1:
            raise InvalidManifest(f"{manifest_path}:{lineno}: n_frames and dim must be >= 1")

        feat_path = root / rel_path
        if not feat_path.is_file():
            raise MissingFile(f"feature file not found: {feat_path}")
        raw = feat_path.read_bytes()
        expected = 4 * n_frames * dim
        if len(raw) != expected:
            raise DimensionMismatch(
                f"{feat_path}: {len(raw)} bytes, expected {expected} (= 4*{n_frames}*{dim})"
            )
        frames = np.frombuffer(raw, dtype="<f4").reshape(n_frames, dim)
        sequences.append(
            FeatureSequence(
                utterance_id=utt_id,
                speaker_id=speaker,
                frames=frames,
                alignments=_parse_words(record, utt_id),
            )
        )
    return Corpus(sequences)


def write_corpus(corpus: Corpus, out_dir: str | Path) -> Path:
    """Write manifest + one .f32 file per utterance; returns the manifest path.

    Round trip through load_corpus reproduces frames bit-for-bit.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest_path = out_dir / MANIFEST_NAME
    with open(manifest_path, "w") as fh:
        for seq in corpus:
            rel_path = f"{seq.utterance_id}.f32"
            data = np.ascontiguousarray(seq.frames, dtype="<f4")
            (out_dir / rel_path).write_bytes(data.tobytes())
            record = {
                "id": seq.utterance_id,
                "speaker": seq.speaker_id,
                "n_frames": seq.n_frames,
                "dim": seq.dim,
                "path": rel_path,
            }
            if seq.alignments:
                record["words"] = [
                    {"label": a.label, "start": a.start, "end": a.end} for a in seq.alignments
                ]
            fh.write(json.dumps(record, sort_keys=True) + "\n")
    return manifest_path


def _normalize_group(frames_list: list[np.ndarray], epsilon: float) -> list[np.ndarray]:
    # population variance over the pooled frames of the group, f64 statistics
    pooled = np.concatenate(frames_list, axis=0).astype(np.float64)
    mean = pooled.mean(axis=0)
    var = pooled.var(axis=0)
    scale = 1.0 / np.sqrt(np.maximum(var, epsilon))
    return [((f.astype(np.float64) - mean) * scale).astype(np.float32) for f in frames_list]


def normalize(corpus: Corpus, scope: NormalizationScope) -> Corpus:
    """Mean/variance-normalize each dimension within the chosen scope group.

    Per-dimension mean becomes 0 and variance 1 (floored at scope.epsilon)
    within each group. Returns a new corpus; the input is left unmodified.
    """
    if len(corpus) == 0:
        raise EmptyScopeGroup("cannot normalize an empty corpus")
    if scope.mode == "none":
        return Corpus([replace(seq, frames=seq.frames.copy()) for seq in corpus])

    if scope.mode == "per-utterance":
        groups = [[seq] for seq in corpus]
    else:  # per-speaker
        by_speaker: dict[str, list[FeatureSequence]] = {}
        for seq in corpus:
            if not seq.speaker_id:
                raise EmptyScopeGroup(
                    f"utterance {seq.utterance_id!r} has no speaker id (per-speaker scope)"
                )
            by_speaker.setdefault(seq.speaker_id, []).append(seq)
        groups = list(by_speaker.values())

    normalized: dict[str, np.ndarray] = {}
    for group in groups:
        frames_list = [seq.frames for seq in group]
        if sum(f.shape[0] for f in frames_list) == 0:
            raise EmptyScopeGroup(f"group of {group[0].speaker_id!r} has zero frames")
        for seq, frames in zip(group, _normalize_group(frames_list, scope.epsilon)):
            normalized[seq.utterance_id] = frames
    return Corpus([replace(seq, frames=normalized[seq.utterance_id]) for seq in corpus])


def extract_segments(corpus: Corpus) -> list[WordSegment]:
    """Cut one WordSegment per word alignment; frames are copies."""
    segments = []
    for seq in corpus:
        for a in seq.alignments:
            # alignment bounds are validated at FeatureSequence construction
            segments.append(
                WordSegment(
                    source=seq.utterance_id,
                    label=a.label,
                    start_frame=a.start,
                    end_frame=a.end,
                    frames=seq.frames[a.start:a.end].copy(),
                )
            )
    return segments


def sample_pairs(
    segments: Sequence[WordSegment], n_pairs: int, seed: int
) -> list[tuple[WordSegment, WordSegment]]:
    """Sample same-label segment pairs, emitting both orderings of each draw.

    Draws n_pairs/2 unordered pairs uniformly (with replacement across draws)
    from all same-label segment pairs, then mirrors each draw, so the result
    holds n_pairs ordered pairs. Reproducible from seed.

    Raises:
        OddPairCountRequested: n_pairs is odd (orderings come in twos).
        NoPositivePairsAvailable: no label has two or more segments.
    """
    if n_pairs % 2 != 0:
        raise OddPairCountRequested(f"n_pairs must be even, got {n_pairs}")

    by_label: dict[str, list[int]] = {}
    for idx, seg in enumerate(segments):
        by_label.setdefault(seg.label, []).append(idx)
    eligible: list[tuple[int, int]] = []
    for label in sorted(by_label):
        members = by_label[label]
        for i in range(len(members)):
            for j in range(i + 1, len(members)):
                eligible.append((members[i], members[j]))
    if not eligible:
        raise NoPositivePairsAvailable("every label has fewer than two segments")

    rng = np.random.default_rng(seed)
    draws = rng.integers(0, len(eligible), size=n_pairs // 2)
    pairs = []
    for d in draws:
        i, j = eligible[int(d)]
        pairs.append((segments[i], segments[j]))
        pairs.append((segments[j], segments[i]))
    return pairs
