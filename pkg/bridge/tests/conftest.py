"""Shared fixtures: a tiny locally built encoder and synthetic 16 kHz clips."""

import json
import os

import pytest
from audio_synth import CLIP_SPECS, tone, write_wav

os.environ.setdefault("HF_HUB_OFFLINE", "1")  # model ids resolve locally only

criterion_lines: list[str] = []


def _record(name: str, passed: bool, detail: str = "") -> None:
    line = f"{'PASS' if passed else 'FAIL'}  {name}" + (f"  ({detail})" if detail else "")
    criterion_lines.append(line)
    print(line, flush=True)


@pytest.fixture
def record_criterion():
    return _record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not criterion_lines:
        return
    terminalreporter.section("bridge acceptance criteria")
    for line in criterion_lines:
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def encoder_dir(tmp_path_factory):
    """A small wav2vec2-style encoder with seeded weights, saved to disk."""
    import torch
    from transformers import Wav2Vec2Config, Wav2Vec2Model

    torch.manual_seed(0)
    cfg = Wav2Vec2Config(
        hidden_size=32, num_hidden_layers=3, num_attention_heads=2,
        intermediate_size=64, conv_dim=(32, 32), conv_stride=(5, 4),
        conv_kernel=(10, 8), num_feat_extract_layers=2,
        num_conv_pos_embeddings=16, num_conv_pos_embedding_groups=2,
        vocab_size=40)
    out = tmp_path_factory.mktemp("encoder") / "tiny-w2v2"
    Wav2Vec2Model(cfg).save_pretrained(out)
    return out


@pytest.fixture(scope="session")
def encoder(encoder_dir):
    from awekws_bridge import load_encoder

    return load_encoder(str(encoder_dir))


@pytest.fixture(scope="session")
def audio_manifest(tmp_path_factory):
    """Three mono clips; every clip carries one word alignment in seconds."""
    root = tmp_path_factory.mktemp("clips")
    lines = []
    for i, (name, speaker, freq, dur) in enumerate(CLIP_SPECS):
        write_wav(root / f"{name}.wav", tone(dur, freq, seed=i))
        lines.append(json.dumps({
            "path": f"{name}.wav",
            "speaker_id": speaker,
            "alignments": [
                {"label": f"word{i}", "start": 0.05, "end": dur - 0.05}],
        }))
    manifest = root / "audio.jsonl"
    manifest.write_text("\n".join(lines) + "\n")
    return manifest


@pytest.fixture(scope="session")
def extracted_manifest(encoder, encoder_dir, audio_manifest, tmp_path_factory):
    """Layer-2 features of the three clips, written once for the session."""
    from awekws_bridge import ExtractionJob, extract

    out = tmp_path_factory.mktemp("features") / "layer2"
    return extract(ExtractionJob(str(encoder_dir), 2, audio_manifest, out),
                   encoder=encoder)
