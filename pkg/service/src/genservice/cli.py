"""Command-line entry points for the generation service."""

from __future__ import annotations

import argparse
import logging
import sys

from .app import ServiceConfig, serve


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clinevent-service")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the generation service")
    p.add_argument("--model", default="echo", help='"echo", a model id, or a checkpoint path')
    p.add_argument("--device", default="cpu")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--max-batch-size", type=int, default=32)

    p = sub.add_parser("finetune", help="fine-tune on a compiled-prompt export")
    p.add_argument("--train", required=True, help="compiled-prompt JSONL")
    p.add_argument("--dev-dataset", required=True, help="validation dataset JSONL")
    p.add_argument("--ontology", required=True)
    p.add_argument("--model", default="t5-large")
    p.add_argument("--device", default="cpu")
    p.add_argument("--epochs", type=int, default=3)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--learning-rate", type=float, default=1e-5)
    p.add_argument("--out-dir", default="checkpoint")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, stream=sys.stderr)
    if args.command == "serve":
        serve(
            ServiceConfig(
                model=args.model,
                device=args.device,
                max_batch_size=args.max_batch_size,
                port=args.port,
            )
        )
        return 0
    if args.command == "finetune":
        from .finetune import FinetuneConfig, finetune

        checkpoint = finetune(
            args.train,
            args.dev_dataset,
            args.ontology,
            FinetuneConfig(
                model=args.model,
                device=args.device,
                epochs=args.epochs,
                batch_size=args.batch_size,
                learning_rate=args.learning_rate,
                out_dir=args.out_dir,
            ),
        )
        print(checkpoint)
        return 0
    return 1


if __name__ == "__main__":
    sys.exit(main())
