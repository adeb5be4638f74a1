"""CLI mirroring AdapterConfig. Exit codes: 0 success, 1 failure, 2 usage."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Sequence

from .formats import AdapterError
from .produce import PREDICTORS, AdapterConfig, produce


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pagewise-adapter",
        description="Run a per-page predictor over a manifest and emit a "
        "pagewise prediction file.",
    )
    parser.add_argument("--manifest", type=Path, required=True)
    parser.add_argument("--space", type=Path, required=True)
    parser.add_argument("--out", type=Path, required=True)
    parser.add_argument("--predictor", choices=PREDICTORS, default="dummy_uniform")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--batch-size", type=int, default=32)
    parser.add_argument("--device", default="cpu", help="opaque hint passed through")
    parser.add_argument("--entry", help="module:function hook for external_model")
    parser.add_argument("--root", type=Path, help="directory page paths are relative to")
    parser.add_argument("--lenient", action="store_true",
                        help="skip unreadable images instead of failing")
    parser.add_argument("--quiet", action="store_true")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = AdapterConfig(
            manifest=args.manifest,
            space=args.space,
            out=args.out,
            predictor=args.predictor,
            seed=args.seed,
            batch_size=args.batch_size,
            device=args.device,
            entry_point=args.entry,
            root=args.root,
            strict=not args.lenient,
        )
        path = produce(config)
    except (AdapterError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if not args.quiet:
        print(f"wrote predictions to {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
