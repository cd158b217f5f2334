"""Command-line interface.

Subcommands mirror the pipeline stages; ``run`` executes all of them.
Flags override config-file fields, which override built-in defaults; the
seed may also come from the CURAGEN_SEED environment variable.

Exit codes: 0 ok, 2 config error, 3 io error, 4 provider error,
5 internal invariant violation.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Any, Sequence

from .cluster import ClusterError
from .corpus import CorpusError
from .embed import EmbeddingError, ProviderError
from .perturb import PerturbError
from .pipeline import (
    ArtifactError,
    ConfigError,
    StageError,
    config_from_dict,
    load_config_file,
    render_report,
    run_pipeline,
)
from .score import ScoreError
from .select import InvariantError, SelectError
from .tune import TuneError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_PROVIDER = 4
EXIT_INTERNAL = 5


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="curagen",
        description="Select high-generalization subsets of instruction-tuning corpora.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_stage_parser(name: str, help_text: str) -> argparse.ArgumentParser:
        stage = sub.add_parser(name, help=help_text)
        stage.add_argument("--config", help="JSON config file; flags override its fields")
        stage.add_argument("--corpus", help="corpus JSONL path")
        stage.add_argument("--seed", type=int, help="top-level seed (or env CURAGEN_SEED)")
        stage.add_argument("--output-dir", help="artifact directory")
        stage.add_argument(
            "--cluster-provider",
            help="provider shorthand, e.g. mock:dim=64,seed=0 | file:path=... | remote:url=...",
        )
        stage.add_argument("--score-provider", help="provider shorthand (see --cluster-provider)")
        stage.add_argument("--k-min", type=int, help="smallest candidate cluster count")
        stage.add_argument("--k-max", type=int, help="largest candidate cluster count")
        stage.add_argument("--batch-size", type=int, help="mini-batch size for k-means")
        stage.add_argument("--iterations", type=int, help="mini-batches per k-means fit")
        stage.add_argument("--n-init", type=int, help="seeded restarts per k-means fit")
        stage.add_argument(
            "--silhouette-sample-cap",
            type=int,
            help="points above which silhouette is computed on a seeded sample",
        )
        stage.add_argument("--variants", type=int, help="perturbed variants per record (N)")
        stage.add_argument("--n", help="deletion count, or 'auto' to tune it")
        stage.add_argument("--tune-sample", type=int, help="records sampled for the n sweep (K)")
        stage.add_argument("--tune-n-max", type=int, help="largest deletion count swept")
        stage.add_argument(
            "--method", choices=["generalization-topk", "random", "kcenter-greedy"]
        )
        stage.add_argument("--quota", type=int, help="per-cluster selection quota")
        stage.add_argument("--size", type=int, help="total size for random/kcenter selection")
        stage.add_argument(
            "--per-cluster-random",
            action="store_true",
            default=None,
            help="sample the random baseline per cluster instead of corpus-wide",
        )
        stage.add_argument("--workers", type=int, help="concurrent scoring workers")
        stage.add_argument(
            "--skip-errors",
            action="store_true",
            default=None,
            help="record per-record scoring failures instead of aborting",
        )
        stage.add_argument(
            "--dump-variants",
            action="store_true",
            default=None,
            help="write perturbed variants to variants.jsonl for audit",
        )
        stage.add_argument(
            "--resume",
            action="store_true",
            help="skip stages whose input fingerprints match the recorded state",
        )
        return stage

    add_stage_parser("run", "run every stage in order")
    add_stage_parser("ingest", "load and validate the corpus")
    add_stage_parser("embed", "compute cluster-space embeddings into the cache")
    add_stage_parser("sweep-k", "sweep candidate cluster counts and choose p")
    add_stage_parser("cluster", "fit the final model and write assignments")
    add_stage_parser("tune-n", "sweep deletion counts and choose the operating n")
    add_stage_parser("score", "score every record and write the score table")
    add_stage_parser("select", "produce the selection manifest and selected records")

    report = sub.add_parser("report", help="render a human summary from the JSON artifacts")
    report.add_argument("--output-dir", default="curagen_out")
    return parser


_CONFIG_FLAGS = (
    "corpus",
    "seed",
    "output_dir",
    "cluster_provider",
    "score_provider",
    "k_min",
    "k_max",
    "batch_size",
    "iterations",
    "n_init",
    "silhouette_sample_cap",
    "variants",
    "n",
    "tune_sample",
    "tune_n_max",
    "method",
    "quota",
    "size",
    "per_cluster_random",
    "workers",
    "skip_errors",
    "dump_variants",
)


def _config_from_args(args: argparse.Namespace):
    raw: dict[str, Any] = {}
    if args.config:
        raw.update(load_config_file(args.config))
    for key in _CONFIG_FLAGS:
        value = getattr(args, key, None)
        if value is not None:
            raw[key] = value
    if isinstance(raw.get("n"), str) and raw["n"] != "auto":
        try:
            raw["n"] = int(raw["n"])
        except ValueError:
            raise ConfigError(f"--n must be an integer or 'auto', got '{raw['n']}'") from None
    return config_from_dict(raw, env_seed=os.environ.get("CURAGEN_SEED"))


def _exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, (ConfigError, PerturbError)):
        return EXIT_CONFIG
    if isinstance(exc, ProviderError):
        return EXIT_PROVIDER
    if isinstance(exc, (CorpusError, ArtifactError, EmbeddingError, OSError)):
        return EXIT_IO
    if isinstance(
        exc, (InvariantError, ClusterError, ScoreError, SelectError, TuneError)
    ):
        return EXIT_INTERNAL
    return EXIT_INTERNAL


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)

    if args.command == "report":
        try:
            sys.stdout.write(render_report(args.output_dir))
        except (OSError, json.JSONDecodeError) as exc:
            print(f"error: cannot render report: {exc}", file=sys.stderr)
            return EXIT_IO
        return EXIT_OK

    try:
        config = _config_from_args(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    stages = None if args.command == "run" else [args.command]
    try:
        summary = run_pipeline(config, stages=stages, resume=args.resume)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code_for(exc.cause)
    except (ConfigError, CorpusError, ArtifactError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code_for(exc)

    for entry in summary["stages"]:
        status = "skipped" if entry["skipped"] else f"{entry['seconds']:.2f}s"
        print(f"{entry['stage']}: {status}")
    return EXIT_OK


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
