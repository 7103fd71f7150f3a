"""Command-line wrapper: ``nver-extract extract --fm ... --audio-root ...``."""

from __future__ import annotations

import argparse
import logging
import sys

from .extract import ExtractionJob, extract_embeddings
from .registry import REGISTRY, ExtractorError


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nver-extract",
        description="Convert an audio corpus into pooled foundation-model embeddings.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    extract = sub.add_parser("extract", help="embed every clip listed in the label map")
    extract.add_argument("--fm", required=True, choices=sorted(REGISTRY))
    extract.add_argument("--audio-root", required=True)
    extract.add_argument("--labels", required=True, help="csv with path,label[,speaker,dataset]")
    extract.add_argument("--out", required=True, help="output directory")
    extract.add_argument(
        "--backend", default=None,
        help="plugin 'package.module:factory' supplying the model runtime",
    )
    return parser


def run_cli(argv: list[str]) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code if isinstance(exc.code, int) else 1
        return 0 if code == 0 else 1
    job = ExtractionJob(
        fm_name=args.fm,
        audio_root=args.audio_root,
        label_map=args.labels,
        output_dir=args.out,
        backend_spec=args.backend,
    )
    try:
        result = extract_embeddings(job)
    except ExtractorError as exc:
        logging.getLogger("nver_extract").error("%s", exc)
        return 2
    print(
        f"wrote {result.rows_written} rows to {result.embeddings_path} "
        f"({len(result.rejects)} rejected)"
    )
    return 0


def main() -> int:
    return run_cli(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())
