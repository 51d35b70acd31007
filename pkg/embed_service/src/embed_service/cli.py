"""Command line entry point for the embedding service."""

from __future__ import annotations

import argparse
import sys

import uvicorn

from .app import DEFAULT_MAX_BATCH, create_app
from .encoder import ModelNotAvailable, load_encoder

__all__ = ["build_parser", "main"]

DEFAULT_MODEL_ID = "hashed:768"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embed-service",
        description="Serve a text encoder over the /embed wire contract.",
    )
    parser.add_argument("--host", default="127.0.0.1", help="bind address")
    parser.add_argument("--port", type=int, default=8080, help="bind port")
    parser.add_argument(
        "--model-id",
        default=DEFAULT_MODEL_ID,
        help="hashed:<dim> or a sentence-transformers model name/path",
    )
    parser.add_argument(
        "--max-batch",
        type=int,
        default=DEFAULT_MAX_BATCH,
        help="largest accepted texts array per request",
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.max_batch < 1:
        print("error: --max-batch must be positive", file=sys.stderr)
        return 1
    try:
        encoder = load_encoder(args.model_id)
    except ModelNotAvailable as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    app = create_app(encoder=encoder, max_batch=args.max_batch)
    print(
        f"serving {encoder.model_id} (dim {encoder.dim}) "
        f"on http://{args.host}:{args.port}"
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


if __name__ == "__main__":
    sys.exit(main())
