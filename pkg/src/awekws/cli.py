"""Command-line pipeline: train, embed, search, evaluate, layer-sweep,
gradcheck.

Exit codes: 0 success, 2 bad usage, 3 missing file, 4 data validation,
5 training failure, 6 numeric failure, 7 evaluation failure, 8 inconsistent
layer sets, 1 anything else.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .corpus import (
    NormalizationScope,
    extract_segments,
    load_corpus,
    normalize,
    sample_pairs,
)
from .embedders import (
    CaeRnn,
    MeanpoolEmbedder,
    RnnConfig,
    RnnEmbedder,
    SubsampleConfig,
    SubsampleEmbedder,
    TransformerConfig,
    TransformerEmbedder,
    load_embedder,
)
from .errors import AwekwsError, ComputeError, DimMismatch, LayerSetInconsistent, MissingFile
from .gradsuite import TOLERANCE, run_suite
from .kws import (
    WindowConfig,
    dtw_search_all,
    read_detections,
    search,
    template_sets,
    write_detections,
)
from .metrics import GroundTruth, evaluate, report_to_table, write_report
from .training import ContrastiveConfig, train

_DTYPES = {"f32": np.float32, "f64": np.float64}
_TRAINABLE_IDS = ("contrastive-transformer", "contrastive-rnn", "cae-rnn")
CHECKPOINT_NAME = "checkpoint.bin"


def _norm_scope(mode: str) -> NormalizationScope | None:
    return None if mode == "none" else NormalizationScope(mode)


def _load_normalized(manifest, mode: str):
    corpus = load_corpus(manifest)
    scope = _norm_scope(mode)
    return normalize(corpus, scope) if scope else corpus


def _window_config(args) -> WindowConfig:
    return WindowConfig(args.min_len, args.max_len, args.len_step, args.stride)


def _add_window_flags(sp) -> None:
    sp.add_argument("--min-len", type=int, default=10)
    sp.add_argument("--max-len", type=int, default=65)
    sp.add_argument("--len-step", type=int, default=5)
    sp.add_argument("--stride", type=int, default=5)


def _write_run_metadata(out_dir: Path, args) -> None:
    skip = {"func", "config"}
    echo = {}
    for key, val in vars(args).items():
        if key in skip or callable(val):
            continue
        echo[key] = str(val) if isinstance(val, Path) else val
    payload = {"version": __version__, "config": echo}
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "run.json").write_text(
        json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _build_trainable(embedder_id: str, input_dim: int, args, dtype):
    if embedder_id == "contrastive-transformer":
        cfg = TransformerConfig(input_dim=input_dim, n_layers=args.n_layers,
                                n_heads=args.n_heads, model_dim=args.model_dim,
                                ffn_dim=args.ffn_dim, awe_dim=args.awe_dim)
        return TransformerEmbedder.initialize(cfg, seed=args.seed, dtype=dtype)
    cls = RnnEmbedder if embedder_id == "contrastive-rnn" else CaeRnn
    cfg = RnnConfig(input_dim=input_dim, n_layers=args.n_layers,
                    hidden_dim=args.hidden_dim, awe_dim=args.awe_dim)
    return cls.initialize(cfg, seed=args.seed, dtype=dtype)


def _select_embedder(args):
    if getattr(args, "checkpoint", None):
        return load_embedder(args.checkpoint)
    if args.embedder == "meanpool":
        return MeanpoolEmbedder()
    if args.embedder == "subsample":
        return SubsampleEmbedder(SubsampleConfig(k=args.k))
    raise MissingFile(
        f"embedder {args.embedder!r} is trainable; pass --checkpoint")


def cmd_train(args) -> int:
    out_dir = Path(args.out_dir)
    corpus = _load_normalized(args.manifest, args.normalize)
    segments = extract_segments(corpus)
    pairs = sample_pairs(segments, args.n_pairs, args.seed)
    embedder = _build_trainable(args.embedder, corpus.dim, args,
                                _DTYPES[args.dtype])
    cfg = ContrastiveConfig(temperature=args.temperature,
                            batch_size=args.batch_size, steps=args.steps,
                            seed=args.seed, learning_rate=args.learning_rate)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "train_log.jsonl", "w") as log:
        records = train(embedder, pairs, cfg, log_file=log)
    embedder.save(out_dir / CHECKPOINT_NAME)
    _write_run_metadata(out_dir, args)
    final = records[-1]["loss"] if records else float("nan")
    print(f"trained {args.embedder} for {cfg.steps} steps; final loss {final:.6f}")
    print(f"checkpoint: {out_dir / CHECKPOINT_NAME}")
    return 0


def cmd_embed(args) -> int:
    corpus = _load_normalized(args.manifest, args.normalize)
    embedder = _select_embedder(args)
    if args.segments:
        items = [(f"{s.source}:{s.start_frame}-{s.end_frame}", s.label, s.frames)
                 for s in extract_segments(corpus)]
    else:
        items = [(uid, None, corpus[uid].frames) for uid in corpus.utterance_ids()]
    vectors = embedder.embed_batch([frames for _, _, frames in items])
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w") as fh:
        for (uid, label, _), vec in zip(items, vectors):
            rec = {"id": uid, "embedder_id": embedder.embedder_id,
                   "vector": [float(v) for v in vec]}
            if label is not None:
                rec["label"] = label
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    print(f"wrote {len(items)} embeddings to {out}")
    return 0


def _load_search_inputs(args):
    templates = _load_normalized(args.templates_manifest, args.template_norm)
    corpus = _load_normalized(args.search_manifest, args.search_norm)
    if templates.dim != corpus.dim:
        raise DimMismatch(
            f"templates are {templates.dim}-dim, search corpus is {corpus.dim}-dim")
    return template_sets(templates), corpus


def cmd_search(args) -> int:
    keywords, corpus = _load_search_inputs(args)
    if args.dtw_baseline:
        rankings = dtw_search_all(keywords, corpus, threads=args.threads)
    else:
        rankings = search(keywords, corpus, _select_embedder(args),
                          _window_config(args))
    out_dir = Path(args.out_dir)
    write_detections(rankings, out_dir / "detections.jsonl")
    _write_run_metadata(out_dir, args)
    print(f"scored {len(keywords)} keywords over {len(corpus)} utterances")
    print(f"detections: {out_dir / 'detections.jsonl'}")
    return 0


def cmd_evaluate(args) -> int:
    for path in (args.detections, args.truth):
        if not Path(path).is_file():
            raise MissingFile(f"no such file: {path}")
    rankings = read_detections(args.detections)
    truth = GroundTruth.load(args.truth)
    report = evaluate(rankings, truth, min_occurrences=args.min_occurrences)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_report(report, out_dir / "report.json", out_dir / "report.tsv")
    _write_run_metadata(out_dir, args)
    print(report_to_table(report), end="")
    return 0


def _discover_layers(root: Path) -> dict[str, Path]:
    if not root.is_dir():
        raise MissingFile(f"layer root {root} is not a directory")
    layers = {p.name: p / "manifest.jsonl"
              for p in sorted(root.iterdir()) if (p / "manifest.jsonl").is_file()}
    if not layers:
        raise MissingFile(f"no <layer>/manifest.jsonl found under {root}")
    return layers


def cmd_layer_sweep(args) -> int:
    tmpl_layers = _discover_layers(Path(args.templates_root))
    search_layers = _discover_layers(Path(args.search_root))
    if set(tmpl_layers) != set(search_layers):
        raise LayerSetInconsistent(
            f"template layers {sorted(tmpl_layers)} != search layers {sorted(search_layers)}")
    truth = GroundTruth.load(args.truth)
    window_cfg = _window_config(args)

    rows = []
    utterance_sets: set[frozenset] = set()
    for name in sorted(search_layers):
        templates = _load_normalized(tmpl_layers[name], args.template_norm)
        corpus = _load_normalized(search_layers[name], args.search_norm)
        utterance_sets.add(frozenset(corpus.utterance_ids()))
        if len(utterance_sets) > 1:
            raise LayerSetInconsistent(
                f"layer {name!r} covers a different utterance set")
        rankings = search(template_sets(templates), corpus, MeanpoolEmbedder(),
                          window_cfg)
        report = evaluate(rankings, truth, min_occurrences=args.min_occurrences)
        rows.append((name, report.mean_ap, report.mean_p_at_10, report.mean_p_at_n))

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    table = "layer\tmap\tp_at_10\tp_at_n\n" + "".join(
        f"{n}\t{m:.6f}\t{p10:.6f}\t{pn:.6f}\n" for n, m, p10, pn in rows)
    (out_dir / "sweep.tsv").write_text(table)
    series = {"layers": [r[0] for r in rows],
              "map": [r[1] for r in rows],
              "p_at_10": [r[2] for r in rows],
              "p_at_n": [r[3] for r in rows]}
    (out_dir / "sweep_series.json").write_text(
        json.dumps(series, sort_keys=True, indent=2) + "\n")
    _write_run_metadata(out_dir, args)
    print(table, end="")
    return 0


def cmd_gradcheck(args) -> int:
    results = run_suite(n_trials=args.trials, seed=args.seed)
    worst: dict[str, float] = {}
    for r in results:
        worst[r.target] = max(worst.get(r.target, 0.0), r.max_rel_err)
    for target, err in worst.items():
        status = "ok" if err <= TOLERANCE else "FAIL"
        print(f"{target}: max relative error {err:.3e} [{status}]")
    failures = [r for r in results if not r.passed]
    if failures:
        for r in failures:
            print(f"  {r.target} trial {r.trial}: {r.max_rel_err:.3e} "
                  f"at {r.worst_entry}", file=sys.stderr)
        return ComputeError.exit_code
    return 0


def _add_model_flags(sp) -> None:
    sp.add_argument("--n-layers", type=int, default=3)
    sp.add_argument("--n-heads", type=int, default=16)
    sp.add_argument("--model-dim", type=int, default=256)
    sp.add_argument("--ffn-dim", type=int, default=1024)
    sp.add_argument("--awe-dim", type=int, default=256)
    sp.add_argument("--hidden-dim", type=int, default=400)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="awekws",
        description="Acoustic word embeddings and query-by-example search.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command")

    def add(name, fn, help_text):
        sp = sub.add_parser(name, help=help_text)
        sp.set_defaults(func=fn)
        sp.add_argument("--config", type=Path, default=None,
                        help="JSON file of flag defaults; explicit flags win")
        return sp

    sp = add("train", cmd_train, "train an embedder on word pairs")
    sp.add_argument("--manifest", type=Path)
    sp.add_argument("--out-dir", type=Path)
    sp.add_argument("--embedder", choices=_TRAINABLE_IDS,
                    default="contrastive-transformer")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--steps", type=int, default=5000)
    sp.add_argument("--batch-size", type=int, default=8)
    sp.add_argument("--temperature", type=float, default=0.1)
    sp.add_argument("--learning-rate", type=float, default=1e-3)
    sp.add_argument("--n-pairs", type=int, default=20000)
    sp.add_argument("--normalize", default="per-utterance",
                    choices=("none", "per-utterance", "per-speaker"))
    sp.add_argument("--dtype", choices=("f32", "f64"), default="f32")
    sp.add_argument("--threads", type=int, default=1)
    _add_model_flags(sp)

    sp = add("embed", cmd_embed, "write embeddings for a corpus")
    sp.add_argument("--manifest", type=Path)
    sp.add_argument("--out", type=Path)
    sp.add_argument("--embedder", default="meanpool")
    sp.add_argument("--checkpoint", type=Path, default=None)
    sp.add_argument("--segments", action="store_true",
                    help="embed aligned word segments instead of utterances")
    sp.add_argument("--normalize", default="none",
                    choices=("none", "per-utterance", "per-speaker"))
    sp.add_argument("--k", type=int, default=10, help="subsample frame count")
    sp.add_argument("--threads", type=int, default=1)

    sp = add("search", cmd_search, "rank utterances per keyword")
    sp.add_argument("--templates-manifest", type=Path)
    sp.add_argument("--search-manifest", type=Path)
    sp.add_argument("--out-dir", type=Path)
    sp.add_argument("--embedder", default="meanpool")
    sp.add_argument("--checkpoint", type=Path, default=None)
    sp.add_argument("--dtw-baseline", action="store_true")
    sp.add_argument("--template-norm", default="per-speaker",
                    choices=("none", "per-utterance", "per-speaker"))
    sp.add_argument("--search-norm", default="per-utterance",
                    choices=("none", "per-utterance", "per-speaker"))
    sp.add_argument("--k", type=int, default=10, help="subsample frame count")
    sp.add_argument("--threads", type=int, default=1)
    _add_window_flags(sp)

    sp = add("evaluate", cmd_evaluate, "score detections against ground truth")
    sp.add_argument("--detections", type=Path)
    sp.add_argument("--truth", type=Path)
    sp.add_argument("--out-dir", type=Path)
    sp.add_argument("--min-occurrences", type=int, default=10)

    sp = add("layer-sweep", cmd_layer_sweep,
             "meanpool search quality per feature layer")
    sp.add_argument("--templates-root", type=Path)
    sp.add_argument("--search-root", type=Path)
    sp.add_argument("--truth", type=Path)
    sp.add_argument("--out-dir", type=Path)
    sp.add_argument("--min-occurrences", type=int, default=10)
    sp.add_argument("--template-norm", default="per-speaker",
                    choices=("none", "per-utterance", "per-speaker"))
    sp.add_argument("--search-norm", default="per-utterance",
                    choices=("none", "per-utterance", "per-speaker"))
    _add_window_flags(sp)

    sp = add("gradcheck", cmd_gradcheck, "finite-difference gradient suite")
    sp.add_argument("--trials", type=int, default=20)
    sp.add_argument("--seed", type=int, default=0)

    return parser


# Flags a command cannot run without; a config file may supply them, so
# they are checked after the overlay rather than by argparse itself.
_REQUIRED = {
    "train": ("manifest", "out_dir", "seed"),
    "embed": ("manifest", "out"),
    "search": ("templates_manifest", "search_manifest", "out_dir"),
    "evaluate": ("detections", "truth", "out_dir"),
    "layer-sweep": ("templates_root", "search_root", "truth", "out_dir"),
    "gradcheck": (),
}


def _apply_config_file(args, argv) -> None:
    """Overlay values from --config for flags not given on the command line."""
    if getattr(args, "config", None) is None:
        return
    path = Path(args.config)
    if not path.is_file():
        raise MissingFile(f"config file not found: {path}")
    overrides = json.loads(path.read_text())
    for key, value in overrides.items():
        dest = key.replace("-", "_")
        if not hasattr(args, dest):
            raise ValueError(f"config key {key!r} is not a flag of this command")
        flag = "--" + dest.replace("_", "-")
        if any(a == flag or a.startswith(flag + "=") for a in argv):
            continue
        if dest in ("manifest", "out_dir", "out", "checkpoint", "truth",
                    "detections", "templates_manifest", "search_manifest",
                    "templates_root", "search_root"):
            value = Path(value)
        setattr(args, dest, value)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        _apply_config_file(args, argv)
    except AwekwsError as err:
        print(f"error: {err}", file=sys.stderr)
        return err.exit_code
    missing = [d for d in _REQUIRED[args.command] if getattr(args, d) is None]
    if missing:
        flags = ", ".join("--" + d.replace("_", "-") for d in missing)
        parser.error(f"{args.command}: missing required flags {flags}")
    try:
        return args.func(args)
    except AwekwsError as err:
        print(f"error: {err}", file=sys.stderr)
        return err.exit_code


if __name__ == "__main__":
    sys.exit(main())
