"""Mini-batch k-means with SSE and silhouette metrics and argmax-silhouette k selection."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .seeding import rng_for

DISPLACEMENT_TOL = 1e-6
SILHOUETTE_SAMPLE_CAP = 5000
_ASSIGN_CHUNK = 4096


class ClusterError(ValueError):
    """Clustering inputs violate a precondition."""


@dataclass
class KMeansModel:
    k: int
    centroids: np.ndarray  # (k, dim) float64
    counts: np.ndarray  # (k,) per-centroid update counts
    seed: int

    def nonempty_count(self) -> int:
        return int(np.count_nonzero(self.counts > 0))


@dataclass
class ClusterAssignment:
    """Row-aligned nearest-centroid labels and distances for a data matrix."""

    labels: np.ndarray  # (n,) int
    distances: np.ndarray  # (n,) float64

    def __len__(self) -> int:
        return len(self.labels)


@dataclass(frozen=True)
class SilhouetteResult:
    value: float
    sampled: bool
    n_used: int


@dataclass(frozen=True)
class KSweepEntry:
    k: int
    sse: float
    silhouette: float
    sampled: bool


@dataclass(frozen=True)
class KSweepResult:
    entries: tuple[KSweepEntry, ...]
    chosen_p: int

    def to_json(self) -> dict:
        return {
            "sweep": [
                {"k": e.k, "sse": e.sse, "silhouette": e.silhouette, "sampled": e.sampled}
                for e in self.entries
            ],
            "chosen_p": self.chosen_p,
        }


def _as_matrix(data: np.ndarray) -> np.ndarray:
    matrix = np.asarray(data, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] == 0 or matrix.shape[1] == 0:
        raise ClusterError(f"expected a nonempty 2-D matrix, got shape {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise ClusterError("data matrix contains non-finite values")
    return matrix


def nearest_centroids(points: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest centroid per point with deterministic lowest-index tie-break.

    Distances come from explicit per-pair differences, not the Gram
    expansion, so symmetric inputs produce bit-equal distances and argmin
    resolves ties to the lowest centroid index.
    """
    labels = np.empty(len(points), dtype=np.int64)
    dists = np.empty(len(points), dtype=np.float64)
    for start in range(0, len(points), _ASSIGN_CHUNK):
        chunk = points[start : start + _ASSIGN_CHUNK]
        diffs = chunk[:, None, :] - centroids[None, :, :]
        sq = np.einsum("ijk,ijk->ij", diffs, diffs)
        chunk_labels = np.argmin(sq, axis=1)
        labels[start : start + len(chunk)] = chunk_labels
        dists[start : start + len(chunk)] = np.sqrt(
            sq[np.arange(len(chunk)), chunk_labels]
        )
    return labels, dists


def _fit_once(
    data: np.ndarray, k: int, batch_size: int, iterations: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    n = data.shape[0]
    init_rows = rng.choice(n, size=k, replace=False)
    centroids = data[init_rows].copy()
    counts = np.zeros(k, dtype=np.int64)
    effective_batch = min(batch_size, n)
    for _ in range(iterations):
        batch = data[rng.choice(n, size=effective_batch, replace=False)]
        labels, _ = nearest_centroids(batch, centroids)
        previous = centroids.copy()
        # Grouped running-mean update: identical to applying the per-point
        # 1/count step to each batch member in order.
        sums = np.zeros_like(centroids)
        np.add.at(sums, labels, batch)
        batch_counts = np.bincount(labels, minlength=k)
        touched = batch_counts > 0
        new_counts = counts + batch_counts
        centroids[touched] = (
            counts[touched, None] * centroids[touched] + sums[touched]
        ) / new_counts[touched, None]
        counts = new_counts
        displacement = np.sqrt(((centroids - previous) ** 2).sum(axis=1)).max()
        if displacement < DISPLACEMENT_TOL:
            break
    return centroids, counts


def minibatch_kmeans(
    data: np.ndarray,
    k: int,
    batch_size: int,
    iterations: int,
    seed: int,
    n_init: int = 1,
) -> KMeansModel:
    """Train mini-batch k-means with seeded init and per-centroid 1/count updates.

    Centroids initialize from a seeded uniform sample of ``k`` distinct data
    rows; each iteration draws a seeded uniform mini-batch, assigns batch
    points to their nearest centroid, and moves each touched centroid toward
    its batch points with learning rate 1/count. Training stops after
    ``iterations`` batches or when the largest centroid displacement in an
    iteration falls below 1e-6. With ``n_init > 1``, the fit restarts from
    ``n_init`` independent seeded inits and keeps the model with the lowest
    full-data SSE (first winner on exact ties).
    """
    matrix = _as_matrix(data)
    n = matrix.shape[0]
    if k < 1:
        raise ClusterError(f"k must be >= 1, got {k}")
    if k > n:
        raise ClusterError(f"k={k} exceeds the {n} available data rows")
    if batch_size < 1:
        raise ClusterError(f"batch_size must be >= 1, got {batch_size}")
    if iterations < 1:
        raise ClusterError(f"iterations must be >= 1, got {iterations}")
    if n_init < 1:
        raise ClusterError(f"n_init must be >= 1, got {n_init}")

    best: tuple[float, np.ndarray, np.ndarray] | None = None
    for restart in range(n_init):
        rng = rng_for("kmeans", seed, restart)
        centroids, counts = _fit_once(matrix, k, batch_size, iterations, rng)
        _, dists = nearest_centroids(matrix, centroids)
        inertia = float(np.einsum("i,i->", dists, dists))
        if best is None or inertia < best[0]:
            best = (inertia, centroids, counts)
    assert best is not None
    return KMeansModel(k=k, centroids=best[1], counts=best[2], seed=seed)


def assign(model: KMeansModel, data: np.ndarray) -> ClusterAssignment:
    """Map every row to its nearest centroid, recording the distance."""
    matrix = _as_matrix(data)
    if matrix.shape[1] != model.centroids.shape[1]:
        raise ClusterError(
            f"data dim {matrix.shape[1]} does not match centroid dim {model.centroids.shape[1]}"
        )
    labels, dists = nearest_centroids(matrix, model.centroids)
    return ClusterAssignment(labels=labels, distances=dists)


def sse(data: np.ndarray, assignment: ClusterAssignment, model: KMeansModel) -> float:
    """Sum of squared Euclidean distances from each point to its assigned centroid."""
    matrix = _as_matrix(data)
    if len(assignment) != matrix.shape[0]:
        raise ClusterError(
            f"assignment covers {len(assignment)} rows, data has {matrix.shape[0]}"
        )
    if matrix.shape[1] != model.centroids.shape[1]:
        raise ClusterError(
            f"data dim {matrix.shape[1]} does not match centroid dim {model.centroids.shape[1]}"
        )
    if assignment.labels.min() < 0 or assignment.labels.max() >= model.k:
        raise ClusterError("assignment labels fall outside the model's clusters")
    diffs = matrix - model.centroids[assignment.labels]
    return float(np.einsum("ij,ij->", diffs, diffs))


def silhouette(
    data: np.ndarray,
    assignment: ClusterAssignment,
    *,
    sample_cap: int = SILHOUETTE_SAMPLE_CAP,
    seed: int = 0,
) -> SilhouetteResult:
    """Mean silhouette coefficient ``(b - a) / max(a, b)`` over all points.

    ``a(i)`` is the mean distance to other points of i's cluster; ``b(i)``
    the minimum over other clusters of the mean distance to that cluster's
    points; a point alone in its cluster contributes ``s(i) = 0``. Above
    ``sample_cap`` points, the value is computed on a seeded uniform sample
    and flagged as sampled.
    """
    matrix = _as_matrix(data)
    labels = np.asarray(assignment.labels)
    if len(labels) != matrix.shape[0]:
        raise ClusterError(f"assignment covers {len(labels)} rows, data has {matrix.shape[0]}")
    if matrix.shape[0] < 2:
        raise ClusterError("silhouette requires at least 2 points")

    sampled = matrix.shape[0] > sample_cap
    if sampled:
        picked = rng_for("silhouette-sample", seed).choice(
            matrix.shape[0], size=sample_cap, replace=False
        )
        picked.sort()
        matrix = matrix[picked]
        labels = labels[picked]

    clusters = np.unique(labels)
    if clusters.size < 2:
        raise ClusterError("silhouette requires at least 2 non-empty clusters")

    n = matrix.shape[0]
    pairwise = cdist(matrix, matrix)
    cluster_sums = np.stack(
        [pairwise[:, labels == c].sum(axis=1) for c in clusters], axis=1
    )
    cluster_sizes = np.array([(labels == c).sum() for c in clusters], dtype=np.float64)
    own_col = np.searchsorted(clusters, labels)

    own_size = cluster_sizes[own_col]
    scores = np.zeros(n, dtype=np.float64)
    has_peers = own_size > 1
    a = np.zeros(n)
    a[has_peers] = cluster_sums[np.arange(n), own_col][has_peers] / (own_size[has_peers] - 1)

    mean_to_cluster = cluster_sums / cluster_sizes[None, :]
    mean_to_cluster[np.arange(n), own_col] = np.inf
    b = mean_to_cluster.min(axis=1)

    denom = np.maximum(a, b)
    valid = has_peers & (denom > 0)
    scores[valid] = (b[valid] - a[valid]) / denom[valid]
    return SilhouetteResult(value=float(scores.mean()), sampled=sampled, n_used=n)


def choose_p(entries: list[KSweepEntry] | tuple[KSweepEntry, ...]) -> int:
    """The k maximizing silhouette; exact ties resolve to the smallest k."""
    if not entries:
        raise ClusterError("cannot choose p from an empty sweep")
    best = entries[0]
    for entry in entries[1:]:
        if entry.silhouette > best.silhouette or (
            entry.silhouette == best.silhouette and entry.k < best.k
        ):
            best = entry
    return best.k


def select_k(
    data: np.ndarray,
    k_min: int,
    k_max: int,
    *,
    batch_size: int,
    iterations: int,
    seed: int,
    n_init: int = 1,
    sample_cap: int = SILHOUETTE_SAMPLE_CAP,
) -> KSweepResult:
    """Sweep k in [k_min, k_max], recording SSE and silhouette per candidate.

    Each candidate trains with seed ``seed ^ k`` so per-k runs are
    independent yet reproducible. A run that ends with fewer than two
    non-empty clusters records silhouette -1 instead of aborting the sweep.
    """
    matrix = _as_matrix(data)
    if not (2 <= k_min <= k_max <= matrix.shape[0]):
        raise ClusterError(
            f"need 2 <= k_min <= k_max <= rows, got k_min={k_min}, "
            f"k_max={k_max}, rows={matrix.shape[0]}"
        )
    entries: list[KSweepEntry] = []
    for k in range(k_min, k_max + 1):
        k_seed = seed ^ k
        model = minibatch_kmeans(
            matrix, k, batch_size=batch_size, iterations=iterations, seed=k_seed, n_init=n_init
        )
        assignment = assign(model, matrix)
        total_sse = sse(matrix, assignment, model)
        try:
            result = silhouette(matrix, assignment, sample_cap=sample_cap, seed=k_seed)
            entries.append(
                KSweepEntry(k=k, sse=total_sse, silhouette=result.value, sampled=result.sampled)
            )
        except ClusterError:
            entries.append(KSweepEntry(k=k, sse=total_sse, silhouette=-1.0, sampled=False))
    return KSweepResult(entries=tuple(entries), chosen_p=choose_p(entries))
