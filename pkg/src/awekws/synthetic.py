"""Synthetic word-type corpora for end-to-end checks at desk scale.

Each word type is a smoothed random prototype sequence. An instance is the
prototype linearly time-warped, passed through a per-speaker affine channel,
and perturbed with frame noise. Search utterances concatenate instances of
several types; ground truth records which utterances contain each type.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import Corpus, FeatureSequence, WordAlignment
from .kws import template_sets
from .metrics import GroundTruth


@dataclass(frozen=True)
class SyntheticSpec:
    n_types: int = 20
    dim: int = 16
    min_len: int = 20
    max_len: int = 60
    n_train: int = 10
    n_heldout: int = 5
    n_templates: int = 3
    n_search: int = 200
    words_per_utterance: tuple[int, int] = (3, 6)
    n_speakers: int = 8
    noise_scale: float = 0.35
    warp_range: tuple[float, float] = (0.8, 1.25)
    smooth_width: int = 7
    speaker_bias: float = 0.15


@dataclass(frozen=True)
class SyntheticBundle:
    train: Corpus
    train_pairs: list
    heldout: list
    templates: Corpus
    keywords: list
    search: Corpus
    truth: GroundTruth


def _smooth(x: np.ndarray, width: int) -> np.ndarray:
    if width <= 1:
        return x
    kernel = np.ones(width) / width
    return np.apply_along_axis(lambda col: np.convolve(col, kernel, mode="same"),
                               0, x)


def _make_prototypes(spec: SyntheticSpec, rng) -> list[np.ndarray]:
    protos = []
    for _ in range(spec.n_types):
        t = int(rng.integers(spec.min_len, spec.max_len + 1))
        raw = _smooth(rng.normal(size=(t, spec.dim)), spec.smooth_width)
        # Unit overall scale so noise_scale is comparable across types.
        protos.append(raw / raw.std())
    return protos


def _resample(proto: np.ndarray, t_new: int) -> np.ndarray:
    t_old = proto.shape[0]
    if t_new == t_old:
        return proto.copy()
    pos = np.arange(t_new) * ((t_old - 1) / (t_new - 1))
    lo = np.floor(pos).astype(int)
    hi = np.minimum(lo + 1, t_old - 1)
    frac = (pos - lo)[:, None]
    return proto[lo] * (1.0 - frac) + proto[hi] * frac


def _instance(proto: np.ndarray, spec: SyntheticSpec, rng) -> np.ndarray:
    factor = rng.uniform(*spec.warp_range)
    t_new = int(np.clip(round(proto.shape[0] * factor), spec.min_len, spec.max_len))
    warped = _resample(proto, t_new)
    return warped + spec.noise_scale * rng.normal(size=warped.shape)


def _speaker_channels(spec: SyntheticSpec, rng):
    biases = spec.speaker_bias * rng.normal(size=(spec.n_speakers, spec.dim))
    gains = 1.0 + 0.05 * rng.normal(size=(spec.n_speakers, spec.dim))
    return biases, gains


def _as_sequence(frames: np.ndarray, uid: str, speaker: int, biases, gains,
                 alignments=()) -> FeatureSequence:
    channel = frames * gains[speaker] + biases[speaker]
    return FeatureSequence(uid, f"spk{speaker:02d}",
                           channel.astype(np.float32), alignments=alignments)


def make_synthetic(spec: SyntheticSpec = SyntheticSpec(), seed: int = 0) -> SyntheticBundle:
    rng = np.random.default_rng(seed)
    protos = _make_prototypes(spec, rng)
    labels = [f"word{k:02d}" for k in range(spec.n_types)]
    biases, gains = _speaker_channels(spec, rng)

    def speaker() -> int:
        return int(rng.integers(spec.n_speakers))

    def isolated(kind: str, label_idx: int, copy_idx: int) -> FeatureSequence:
        frames = _instance(protos[label_idx], spec, rng)
        label = labels[label_idx]
        align = (WordAlignment(label, 0, frames.shape[0]),)
        return _as_sequence(frames, f"{kind}_{label}_{copy_idx:02d}", speaker(),
                            biases, gains, align)

    train_seqs = [isolated("train", k, i)
                  for k in range(spec.n_types) for i in range(spec.n_train)]
    train = Corpus(train_seqs)
    by_label: dict[str, list] = {}
    for seq in train_seqs:
        by_label.setdefault(seq.alignments[0].label, []).append(
            (seq.frames, seq.alignments[0].label))
    train_pairs = [(a, b) for insts in by_label.values()
                   for a in insts for b in insts if a is not b]

    heldout = []
    for k in range(spec.n_types):
        for _ in range(spec.n_heldout):
            frames = _instance(protos[k], spec, rng)
            channel = frames * gains[speaker()] + biases[speaker()]
            heldout.append((channel.astype(np.float32), labels[k]))

    templates = Corpus([isolated("tmpl", k, i)
                        for k in range(spec.n_types)
                        for i in range(spec.n_templates)])

    search_seqs = []
    occurrences: dict[str, set] = {label: set() for label in labels}
    lo, hi = spec.words_per_utterance
    for u in range(spec.n_search):
        uid = f"utt{u:04d}"
        spk = speaker()
        n_words = int(rng.integers(lo, hi + 1))
        types = [int(t) for t in rng.integers(0, spec.n_types, size=n_words)]
        parts, aligns, offset = [], [], 0
        for k in types:
            frames = _instance(protos[k], spec, rng)
            parts.append(frames)
            aligns.append(WordAlignment(labels[k], offset, offset + frames.shape[0]))
            occurrences[labels[k]].add(uid)
            offset += frames.shape[0]
        search_seqs.append(_as_sequence(np.concatenate(parts), uid, spk,
                                        biases, gains, tuple(aligns)))

    return SyntheticBundle(
        train=train,
        train_pairs=train_pairs,
        heldout=heldout,
        templates=templates,
        keywords=template_sets(templates),
        search=Corpus(search_seqs),
        truth=GroundTruth(occurrences),
    )
