"""Command-line front end: export texts, or verify an engine encode run.

Exit codes: 0 success (and, for parity, zero mismatches), 1 parity
mismatches found, 2 usage/validation problems, 3 file or engine failures.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import __version__
from .errors import BridgeError, BridgeFormatError, EngineInvocationError
from .export import ExportConfig, export, read_text_items
from .parity import DEFAULT_TOLERANCE, parity_check


def cmd_export(args) -> int:
    items = read_text_items(args.input)
    config = ExportConfig(
        model_id=args.model,
        max_len=args.max_len,
        include_special_rows=not args.surface_rows_only,
        batch_size=args.batch_size,
    )
    result = export(items, config, args.output_prefix)
    print(
        f"exported {result.item_count} items "
        f"(h={result.hidden_size}, |V|={result.vocab_size}) -> {result.logit_path}"
    )
    if result.truncated_ids:
        print(f"truncated at {args.max_len} tokens: {', '.join(result.truncated_ids)}")
    return 0


def cmd_parity(args) -> int:
    report = parity_check(
        args.logits,
        args.manifest,
        args.reps,
        k=args.k,
        aggregation=args.aggregation,
        tolerance=args.tolerance,
        dense_path=args.dense,
    )
    print(json.dumps(report.to_dict(), indent=2))
    return 0 if report.ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="encoder-bridge",
        description="Export masked-LM outputs for the ranking engine and verify parity",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("export", help="encode texts into logit/dense/manifest files")
    p.add_argument("--input", required=True, help="JSONL of {id, source, text}")
    p.add_argument("--model", required=True, help="model directory or identifier")
    p.add_argument("--max-len", type=int, default=128)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument(
        "--surface-rows-only",
        action="store_true",
        help="drop [CLS]/[SEP] rows from the logit matrices",
    )
    p.add_argument("--output-prefix", required=True)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("parity", help="check an engine encode run against the reference pipeline")
    p.add_argument("--logits", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--reps", required=True, help="engine representation JSONL")
    p.add_argument("--dense", default=None, help="also verify dense pass-through")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--aggregation", choices=("max", "sum"), default="max")
    p.add_argument("--tolerance", type=float, default=DEFAULT_TOLERANCE)
    p.set_defaults(func=cmd_parity)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (BridgeFormatError, EngineInvocationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except BridgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
