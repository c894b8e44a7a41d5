"""Integration with the primary toolkit, one verdict line for the criterion."""

import awekws.cli
from awekws.corpus import load_corpus
from awekws.kws import read_detections
from awekws_bridge import ExtractionJob, extract_all_layers


def test_bridge_integration(encoder, encoder_dir, audio_manifest,
                            extracted_manifest, tmp_path, record_criterion):
    corpus = load_corpus(extracted_manifest)  # the loader validates on read
    n_loaded = len(corpus)

    out = tmp_path / "search"
    code = awekws.cli.main([
        "search",
        "--templates-manifest", str(extracted_manifest),
        "--search-manifest", str(extracted_manifest),
        "--out-dir", str(out),
    ])
    detections = out / "detections.jsonl"
    rankings = read_detections(detections) if detections.is_file() else []
    full_coverage = (len(rankings) == n_loaded
                     and all(len(r.detections) == n_loaded for r in rankings))

    sweep = extract_all_layers(
        ExtractionJob(str(encoder_dir), 1, audio_manifest, tmp_path / "layers"),
        encoder=encoder)

    ok = (n_loaded == 3 and code == 0 and full_coverage
          and len(sweep) == encoder.depth)
    record_criterion(
        "bridge-integration", ok,
        f"{n_loaded} clips loaded, search exit {code}, "
        f"{len(rankings)} keyword rankings, {len(sweep)} layer corpora "
        f"for depth {encoder.depth}")
    assert ok
