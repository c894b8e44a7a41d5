"""Extraction command line.

Exit codes: 0 success, 2 bad usage, 3 missing file, 4 bad manifest,
5 model load failure, 6 audio decode failure, 7 layer out of range,
1 anything else.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from awekws.errors import AwekwsError

from .bridge import ExtractionJob, extract
from .errors import BridgeError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="awekws-bridge",
        description="extract speech-encoder features into the awekws corpus format")
    sub = parser.add_subparsers(dest="command")
    sp = sub.add_parser("extract", help="write one layer's features as a corpus")
    sp.add_argument("--model", required=True,
                    help="model identifier or local checkpoint directory")
    sp.add_argument("--layer", type=int, required=True,
                    help="1-based transformer block index")
    sp.add_argument("--audio-manifest", type=Path, required=True)
    sp.add_argument("--out", type=Path, required=True)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        manifest = extract(ExtractionJob(args.model, args.layer,
                                         args.audio_manifest, args.out))
    except (AwekwsError, BridgeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return err.exit_code
    print(f"wrote {manifest}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
