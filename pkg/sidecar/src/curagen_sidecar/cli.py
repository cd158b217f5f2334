"""Serve the sidecar from the command line."""
from __future__ import annotations

import argparse
import sys
from typing import Sequence

import uvicorn

from .app import SidecarConfig, create_app
from .backends import BackendError


def main(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="curagen-sidecar", description="Reference embedding server."
    )
    parser.add_argument(
        "--model",
        default="hash:384",
        help="model identifier: hash:<dim> or a sentence-transformers name",
    )
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--max-batch", type=int, default=64)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8900)
    parser.add_argument("--pooling", choices=["mean", "cls"], default="mean")
    args = parser.parse_args(argv)

    config = SidecarConfig(
        model=args.model,
        device=args.device,
        max_batch=args.max_batch,
        port=args.port,
        pooling=args.pooling,
    )
    try:
        app = create_app(config)
    except (BackendError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
