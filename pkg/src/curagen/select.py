"""Final subset construction: per-cluster top-quota plus the two baselines."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import Corpus
from .score import ClusterRanking
from .seeding import rng_for

METHOD_TOPK = "generalization-topk"
METHOD_RANDOM = "random"
METHOD_KCENTER = "kcenter-greedy"


class SelectError(ValueError):
    """Selection inputs violate a precondition."""


class InvariantError(RuntimeError):
    """An internal selection invariant was violated."""


@dataclass(frozen=True)
class SelectedEntry:
    record_id: str
    score: float | None  # ranking score, coverage radius, or None for random


@dataclass(frozen=True)
class ClusterSelection:
    cluster_index: int
    quota: int
    entries: tuple[SelectedEntry, ...]


@dataclass(frozen=True)
class SelectionManifest:
    method: str
    total: int
    per_cluster: tuple[ClusterSelection, ...]
    seed: int
    fingerprint: str

    def selected_ids(self) -> list[str]:
        return [entry.record_id for group in self.per_cluster for entry in group.entries]

    def to_json(self) -> dict:
        return {
            "method": self.method,
            "total": self.total,
            "seed": self.seed,
            "fingerprint": self.fingerprint,
            "per_cluster": [
                {
                    "cluster_index": group.cluster_index,
                    "quota": group.quota,
                    "selected": [
                        {"record_id": entry.record_id, "score": entry.score}
                        for entry in group.entries
                    ],
                }
                for group in self.per_cluster
            ],
        }


def _build_manifest(
    method: str, groups: Sequence[ClusterSelection], seed: int, fingerprint: str
) -> SelectionManifest:
    ids = [entry.record_id for group in groups for entry in group.entries]
    if len(ids) != len(set(ids)):
        raise InvariantError("selection manifest contains duplicate record ids")
    return SelectionManifest(
        method=method,
        total=len(ids),
        per_cluster=tuple(groups),
        seed=seed,
        fingerprint=fingerprint,
    )


def select_top(
    rankings: Sequence[ClusterRanking], quota: int, *, seed: int = 0, fingerprint: str = ""
) -> SelectionManifest:
    """Take the first min(quota, cluster size) ids from each cluster's ranking."""
    if not rankings:
        raise SelectError("select_top requires at least one cluster ranking")
    if quota < 1:
        raise SelectError(f"quota must be >= 1, got {quota}")
    groups = []
    for ranking in sorted(rankings, key=lambda r: r.cluster_index):
        take = min(quota, len(ranking.ordered))
        entries = tuple(
            SelectedEntry(record_id=ranking.ordered[i], score=ranking.ordered_scores[i])
            for i in range(take)
        )
        groups.append(
            ClusterSelection(cluster_index=ranking.cluster_index, quota=quota, entries=entries)
        )
    return _build_manifest(METHOD_TOPK, groups, seed, fingerprint)


def select_random(
    corpus: Corpus, size: int, seed: int, *, fingerprint: str = ""
) -> SelectionManifest:
    """Seeded uniform sample of the corpus without replacement."""
    if not 1 <= size <= len(corpus):
        raise SelectError(f"size must be in [1, {len(corpus)}], got {size}")
    rng = rng_for("select-random", seed)
    picked = rng.choice(len(corpus), size=size, replace=False)
    entries = tuple(
        SelectedEntry(record_id=corpus.records[int(i)].id, score=None) for i in picked
    )
    group = ClusterSelection(cluster_index=0, quota=size, entries=entries)
    return _build_manifest(METHOD_RANDOM, [group], seed, fingerprint)


def select_random_per_cluster(
    groups: dict[int, Sequence[str]], quota: int, seed: int, *, fingerprint: str = ""
) -> SelectionManifest:
    """Seeded uniform sample of min(quota, cluster size) ids from each cluster."""
    if not groups:
        raise SelectError("per-cluster random selection requires at least one cluster")
    if quota < 1:
        raise SelectError(f"quota must be >= 1, got {quota}")
    selections = []
    for cluster_index in sorted(groups):
        ids = list(groups[cluster_index])
        take = min(quota, len(ids))
        rng = rng_for("select-random", seed, cluster_index)
        picked = rng.choice(len(ids), size=take, replace=False)
        entries = tuple(SelectedEntry(record_id=ids[int(i)], score=None) for i in picked)
        selections.append(
            ClusterSelection(cluster_index=cluster_index, quota=quota, entries=entries)
        )
    return _build_manifest(METHOD_RANDOM, selections, seed, fingerprint)


def select_kcenter(
    ids: Sequence[str],
    data: np.ndarray,
    size: int,
    seed: int,
    *,
    start_index: int | None = None,
    fingerprint: str = "",
) -> SelectionManifest:
    """Greedy farthest-first traversal (k-center 2-approximation).

    Starts from a seeded-random point (or a forced ``start_index`` for
    reproducible examples), then repeatedly adds the point farthest from the
    selected set, breaking exact distance ties toward the lowest record id.
    Each pick records the coverage radius, the maximum over all points of
    the distance to the nearest selected point after that pick.
    """
    matrix = np.asarray(data, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != len(ids):
        raise SelectError(
            f"need one id per data row, got {len(ids)} ids and shape {matrix.shape}"
        )
    n = matrix.shape[0]
    if not 1 <= size <= n:
        raise SelectError(f"size must be in [1, {n}], got {size}")
    if len(set(ids)) != len(ids):
        raise SelectError("kcenter ids must be unique")

    if start_index is None:
        start = int(rng_for("kcenter", seed).integers(n))
    else:
        if not 0 <= start_index < n:
            raise SelectError(f"start_index must be in [0, {n}), got {start_index}")
        start = start_index

    min_dist = np.linalg.norm(matrix - matrix[start], axis=1)
    in_set = np.zeros(n, dtype=bool)
    in_set[start] = True
    selected = [start]
    radii = [float(min_dist.max())]
    while len(selected) < size:
        eligible = np.where(in_set, -np.inf, min_dist)
        farthest = eligible.max()
        candidates = np.flatnonzero(eligible == farthest)
        pick = int(min(candidates, key=lambda i: ids[int(i)]))
        selected.append(pick)
        in_set[pick] = True
        min_dist = np.minimum(min_dist, np.linalg.norm(matrix - matrix[pick], axis=1))
        radii.append(float(min_dist.max()))

    entries = tuple(
        SelectedEntry(record_id=ids[i], score=radius) for i, radius in zip(selected, radii)
    )
    group = ClusterSelection(cluster_index=0, quota=size, entries=entries)
    return _build_manifest(METHOD_KCENTER, [group], seed, fingerprint)
