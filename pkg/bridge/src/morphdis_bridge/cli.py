"""Command line: ``bridge finetune`` and ``bridge export``.

Exit codes mirror the tagging toolkit: 0 success, 1 usage error, 2 data
error, 3 internal error.
"""
from __future__ import annotations

import argparse
import json
import sys

from .errors import BridgeError
from .export import export_distributions
from .training import FACTORED, KINDS, BridgeConfig, finetune


class _Parser(argparse.ArgumentParser):
    def exit(self, status=0, message=None):  # noqa: A002 - argparse API
        if message:
            self._print_message(message, sys.stderr)
        raise SystemExit(1 if status else 0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bridge", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    ft = sub.add_parser("finetune", help="fine-tune token classifiers")
    ft.add_argument("--base", required=True, help="base model directory or identifier")
    ft.add_argument("--schema", required=True, help="schema document path")
    ft.add_argument("--train", required=True, help="target TRAIN corpus")
    ft.add_argument("--tune", help="TUNE corpus for checkpoint selection")
    ft.add_argument("--stage1", action="append", default=[],
                    help="stage-1 corpus (repeatable; makes the run two-phase)")
    ft.add_argument("--out", required=True, help="artifact directory")
    ft.add_argument("--kind", choices=KINDS, default=FACTORED)
    ft.add_argument("--epochs", type=int, default=10)
    ft.add_argument("--learning-rate", type=float, default=5e-5)
    ft.add_argument("--batch-size", type=int, default=32)
    ft.add_argument("--max-seq-len", type=int, default=512)
    ft.add_argument("--seed", type=int, default=12345)

    ex = sub.add_parser("export", help="write interchange distributions")
    ex.add_argument("--model", required=True, help="artifact directory")
    ex.add_argument("--schema", required=True, help="schema document path")
    ex.add_argument("--corpus", required=True, help="corpus to tag")
    ex.add_argument("--out", required=True, help="interchange output path")
    ex.add_argument("--batch-size", type=int, default=32)
    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return e.code
    try:
        if args.command == "finetune":
            config = BridgeConfig(
                base_model=args.base,
                schema=args.schema,
                target_corpus=args.train,
                out_dir=args.out,
                kind=args.kind,
                epochs=args.epochs,
                learning_rate=args.learning_rate,
                batch_size=args.batch_size,
                max_seq_len=args.max_seq_len,
                seed=args.seed,
                tune_corpus=args.tune,
                stage1_corpora=tuple(args.stage1),
            )
            document = finetune(config)
        else:
            document = export_distributions(
                args.model, args.corpus, args.schema, args.out, args.batch_size
            )
    except (BridgeError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # pragma: no cover - defensive
        print(f"internal error: {e}", file=sys.stderr)
        return 3
    print(json.dumps(document, indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
