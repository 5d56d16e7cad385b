"""repcause-ingest: extract pre-trained representations into PTRZ files."""
from __future__ import annotations

import argparse
import logging
import sys

from .image import ImageJob, extract_image
from .text import DEFAULT_TEXT_MODEL, TextJob, extract_text


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="repcause-ingest",
        description="Extract text/image representations into PTRZ files.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("text", help="[CLS] vectors from a BERT-style encoder")
    p.add_argument("--model", default=DEFAULT_TEXT_MODEL)
    p.add_argument("--input", required=True, help="CSV corpus with text,label")
    p.add_argument("--out", required=True)
    p.add_argument("--max-len", dest="max_len", type=int, default=128)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=32)
    p.add_argument("--untrained", action="store_true",
                   help="randomly initialized weights (offline smoke runs)")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("image", help="DenseNet-121 last hidden layer features")
    p.add_argument("--model", default="densenet121")
    p.add_argument("--input", required=True,
                   help="CSV manifest with path,label[,patient_id]")
    p.add_argument("--out", required=True)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=32)
    p.add_argument("--dedup-by", dest="dedup_by",
                   help="manifest column to keep one row per value of")
    p.add_argument("--untrained", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "text":
            info = extract_text(TextJob(
                input_path=args.input, output_path=args.out, model=args.model,
                max_length=args.max_len, batch_size=args.batch_size,
                untrained=args.untrained, seed=args.seed,
            ))
        else:
            info = extract_image(ImageJob(
                input_path=args.input, output_path=args.out, model=args.model,
                batch_size=args.batch_size, dedup_by=args.dedup_by,
                untrained=args.untrained, seed=args.seed,
            ))
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"repcause-ingest: error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {info['out']} (n={info['n']}, d={info['d']})")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
