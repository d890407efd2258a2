"""Command-line entry point: `plm-exporter export ...`."""
from __future__ import annotations

import argparse
import logging
import sys

from .exporter import AGG_MODES, ExportError, ExportJob, export


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plm-exporter",
        description="Answer score-request files with pretrained masked LMs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("export", help="answer a request file")
    p.add_argument("--requests", required=True, help="request file (JSONL)")
    p.add_argument("--model", required=True, help="model identifier or path")
    p.add_argument("--out", required=True, help="response file to write")
    p.add_argument("--agg", default="mean", choices=AGG_MODES,
                   help="attention aggregation mode")
    p.add_argument("--device", default="cpu")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO)
    args = build_parser().parse_args(argv)
    job = ExportJob(requests=args.requests, model=args.model, out=args.out,
                    device=args.device, agg=args.agg)
    try:
        n = export(job)
    except (ExportError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {n} responses to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
