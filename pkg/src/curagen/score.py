"""Per-record generalization scores and per-cluster rankings.

A record's score is the mean Euclidean translation between the embedding of
its original composite text and the embeddings of N word-deletion variants;
records rank score-descending within each cluster.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import InstructionRecord, composite_text
from .embed import EmbeddingError, EmbeddingProvider, embed_batch
from .perturb import PerturbationConfig, perturb


class ScoreError(RuntimeError):
    """Scoring failed for a record or a cluster."""


@dataclass(frozen=True)
class EntryScore:
    """One record's generalization measure with its per-variant distances."""

    record_id: str
    n: int
    distances: tuple[float, ...]
    score: float
    truncated: bool


@dataclass(frozen=True)
class ScoreFailure:
    record_id: str
    error: str


@dataclass(frozen=True)
class ClusterRanking:
    """Record ids of one cluster ordered score-descending, ties by id ascending."""

    cluster_index: int
    ordered: tuple[str, ...]
    ordered_scores: tuple[float, ...]


def euclidean(a: np.ndarray, b: np.ndarray) -> float:
    """Euclidean distance between two equal-dimension vectors, in float64."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ScoreError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(np.linalg.norm(a - b))


def score_entry(
    provider: EmbeddingProvider, record: InstructionRecord, config: PerturbationConfig
) -> EntryScore:
    """Embed the original composite and its N variants in one batch and average the distances."""
    variants = perturb(record.instruction, config, scope=record.id)
    inputs = [composite_text(record)]
    inputs.extend(composite_text(record, variant.text) for variant in variants)
    try:
        vectors = embed_batch(provider, inputs)
    except EmbeddingError as exc:
        # Provider failures keep their category; the record id gives context.
        raise type(exc)(f"record '{record.id}': {exc}") from exc
    original = vectors[0]
    distances = tuple(euclidean(vectors[i + 1], original) for i in range(len(variants)))
    return EntryScore(
        record_id=record.id,
        n=config.n,
        distances=distances,
        score=sum(distances) / len(distances),
        truncated=any(v.truncated for v in variants),
    )


def score_cluster(
    provider: EmbeddingProvider,
    records: Sequence[InstructionRecord],
    config: PerturbationConfig,
    *,
    workers: int = 1,
    skip_errors: bool = False,
) -> tuple[list[EntryScore], list[ScoreFailure]]:
    """Score every record of a cluster, preserving input order.

    Records run independently (optionally across ``workers`` threads) and
    results aggregate in input order, so output is scheduling-independent.
    A per-record failure aborts unless ``skip_errors`` is set, in which case
    it is recorded and the record is excluded.
    """
    if not records:
        raise ScoreError("score_cluster requires at least one record")

    def one(record: InstructionRecord) -> EntryScore | ScoreFailure:
        try:
            return score_entry(provider, record, config)
        except (ScoreError, EmbeddingError) as exc:
            if skip_errors:
                return ScoreFailure(record_id=record.id, error=str(exc))
            raise

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, records))
    else:
        results = [one(record) for record in records]

    scores = [r for r in results if isinstance(r, EntryScore)]
    failures = [r for r in results if isinstance(r, ScoreFailure)]
    return scores, failures


def rank_cluster(scores: Sequence[EntryScore], cluster_index: int = 0) -> ClusterRanking:
    """Total order over a cluster's records: score descending, ties by id ascending."""
    if not scores:
        raise ScoreError("rank_cluster requires at least one score")
    ordered = sorted(scores, key=lambda entry: (-entry.score, entry.record_id))
    return ClusterRanking(
        cluster_index=cluster_index,
        ordered=tuple(entry.record_id for entry in ordered),
        ordered_scores=tuple(entry.score for entry in ordered),
    )
