"""Per-frame feature extraction from pre-trained speech encoders.

Runs 16 kHz mono clips through a frozen wav2vec2/HuBERT-family model and
writes the hidden states of a chosen transformer layer as a feature corpus
that the awekws loader accepts unchanged. Word alignments given in seconds
are converted to frame indices using the encoder's output frame period.
"""

from __future__ import annotations

import json
import math
import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from transformers import AutoModel

from awekws.corpus import Corpus, FeatureSequence, WordAlignment, write_corpus
from awekws.errors import InvalidManifest, MissingFile

from .errors import AudioDecodeFailure, LayerOutOfRange, ModelLoadFailure

SAMPLE_RATE = 16_000


@dataclass(frozen=True)
class AudioEntry:
    """One clip of the audio manifest; alignment times are in seconds."""

    path: Path
    speaker_id: str
    alignments: tuple = ()  # (label, start_s, end_s) triples

    @property
    def utterance_id(self) -> str:
        return self.path.stem


@dataclass(frozen=True)
class ExtractionJob:
    model_id: str
    layer: int  # 1-based transformer block index
    audio_manifest: Path
    out_dir: Path


@dataclass(frozen=True)
class SpeechEncoder:
    """A frozen encoder plus the geometry needed for frame bookkeeping."""

    model: torch.nn.Module
    depth: int
    frame_period: float  # seconds per output frame


def load_encoder(model_id: str) -> SpeechEncoder:
    """Fetch a wav2vec2/HuBERT-family model and freeze it for inference.

    The output frame period is the convolutional frontend's total stride
    over the 16 kHz input rate (20 ms for the published checkpoints).
    """
    try:
        model = AutoModel.from_pretrained(model_id)
    except Exception as exc:  # transformers raises a zoo of types here
        raise ModelLoadFailure(f"cannot load model {model_id!r}: {exc}") from exc
    strides = getattr(model.config, "conv_stride", None)
    depth = int(getattr(model.config, "num_hidden_layers", 0))
    if not strides or depth < 1:
        raise ModelLoadFailure(
            f"model {model_id!r} has no convolutional frontend; expected a "
            "wav2vec2/HuBERT-family encoder")
    model.eval()
    for p in model.parameters():
        p.requires_grad_(False)
    return SpeechEncoder(model, depth, math.prod(strides) / SAMPLE_RATE)


def read_wav(path: str | Path) -> np.ndarray:
    """Decode a mono 16 kHz 16-bit PCM WAV file to float32 in [-1, 1)."""
    try:
        with wave.open(str(path), "rb") as w:
            channels = w.getnchannels()
            width = w.getsampwidth()
            rate = w.getframerate()
            raw = w.readframes(w.getnframes())
    except (OSError, wave.Error, EOFError) as exc:
        raise AudioDecodeFailure(f"cannot decode {path}: {exc}") from exc
    if channels != 1:
        raise AudioDecodeFailure(f"{path}: expected mono audio, got {channels} channels")
    if rate != SAMPLE_RATE:
        raise AudioDecodeFailure(f"{path}: expected {SAMPLE_RATE} Hz, got {rate} Hz")
    if width != 2:
        raise AudioDecodeFailure(f"{path}: expected 16-bit PCM, got {8 * width}-bit")
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float32) / 32768.0
    if samples.size == 0:
        raise AudioDecodeFailure(f"{path}: no audio frames")
    return samples


def read_audio_manifest(path: str | Path) -> list[AudioEntry]:
    """Parse the line-delimited audio manifest.

    Each line is a JSON object with "path", "speaker_id", and optional
    "alignments" of {"label", "start", "end"} in seconds. Relative clip
    paths resolve against the manifest's directory; utterance ids are the
    clip filename stems.
    """
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"no such audio manifest: {path}")
    entries = []
    for i, line in enumerate(path.read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
            clip = Path(row["path"])
            aligns = tuple((str(a["label"]), float(a["start"]), float(a["end"]))
                           for a in row.get("alignments", ()))
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidManifest(f"{path}:{i}: {exc}") from exc
        entries.append(AudioEntry(clip if clip.is_absolute() else path.parent / clip,
                                  str(row["speaker_id"]), aligns))
    if not entries:
        raise InvalidManifest(f"audio manifest {path} is empty")
    return entries


def to_frame_span(start_s: float, end_s: float, frame_period: float,
                  n_frames: int) -> tuple[int, int]:
    """Seconds to an end-exclusive frame span: floor(t / frame_period).

    The end clamps to the emitted frame count because the convolutional
    frontend trims partial tail frames (roughly receptive-field/stride of
    them, one for the published 20 ms checkpoints), so a span reaching the
    end of the clip in seconds can point past the last emitted frame. Both
    edges are monotone in their time argument.
    """
    start = math.floor(start_s / frame_period)
    end = min(math.floor(end_s / frame_period), n_frames)
    return start, end


def _check_layer(encoder: SpeechEncoder, layer: int) -> None:
    if not 1 <= layer <= encoder.depth:
        raise LayerOutOfRange(
            f"layer {layer} outside [1, {encoder.depth}] for this encoder")


def _all_hidden_states(encoder: SpeechEncoder, samples: np.ndarray) -> tuple:
    out = encoder.model(torch.from_numpy(samples)[None, :],
                        output_hidden_states=True)
    # hidden_states[0] is the frontend output; [i] follows transformer block i
    return out.hidden_states


def _as_sequence(entry: AudioEntry, frames: np.ndarray,
                 period: float) -> FeatureSequence:
    aligns = tuple(WordAlignment(label, *to_frame_span(s, e, period, len(frames)))
                   for label, s, e in entry.alignments)
    return FeatureSequence(entry.utterance_id, entry.speaker_id, frames,
                           sample_period=period, alignments=aligns)


def extract(job: ExtractionJob, encoder: SpeechEncoder | None = None) -> Path:
    """Encode every manifest clip at job.layer and write one corpus.

    Returns the path of the written manifest; the output satisfies every
    awekws corpus invariant, so load_corpus accepts it as-is.
    """
    if encoder is None:
        encoder = load_encoder(job.model_id)
    _check_layer(encoder, job.layer)
    seqs = []
    with torch.no_grad():
        for entry in read_audio_manifest(job.audio_manifest):
            states = _all_hidden_states(encoder, read_wav(entry.path))
            frames = states[job.layer][0].numpy().astype(np.float32)
            seqs.append(_as_sequence(entry, frames, encoder.frame_period))
    return write_corpus(Corpus(seqs), job.out_dir)


def extract_all_layers(job: ExtractionJob,
                       encoder: SpeechEncoder | None = None) -> list[Path]:
    """One corpus per transformer layer, at out_dir/layerNN/manifest.jsonl.

    job.layer is ignored; each clip is decoded and encoded once with all
    hidden states kept, so the utterance sets agree across layers.
    """
    if encoder is None:
        encoder = load_encoder(job.model_id)
    per_layer: list[list[FeatureSequence]] = [[] for _ in range(encoder.depth)]
    with torch.no_grad():
        for entry in read_audio_manifest(job.audio_manifest):
            states = _all_hidden_states(encoder, read_wav(entry.path))
            for idx in range(encoder.depth):
                frames = states[idx + 1][0].numpy().astype(np.float32)
                per_layer[idx].append(_as_sequence(entry, frames,
                                                   encoder.frame_period))
    return [write_corpus(Corpus(seqs), Path(job.out_dir) / f"layer{idx + 1:02d}")
            for idx, seqs in enumerate(per_layer)]
