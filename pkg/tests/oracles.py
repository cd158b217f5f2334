"""Independent brute-force oracles used to check library results.

Everything here is written as plain loops over definitions, deliberately
avoiding the library's own code paths and vectorized shortcuts.
"""
from __future__ import annotations

import itertools
import math

import numpy as np


def euclidean_oracle(a, b) -> float:
    total = math.fsum((float(x) - float(y)) ** 2 for x, y in zip(a, b))
    return math.sqrt(total)


def sse_oracle(data, labels, centroids) -> float:
    return math.fsum(
        (float(x) - float(c)) ** 2
        for row, label in zip(data, labels)
        for x, c in zip(row, centroids[label])
    )


def silhouette_oracle(data, labels) -> float:
    """O(n^2) silhouette from the definition, via per-pair fsum distances."""
    n = len(data)
    scores = []
    for i in range(n):
        same = [j for j in range(n) if j != i and labels[j] == labels[i]]
        if not same:
            scores.append(0.0)
            continue
        a = math.fsum(euclidean_oracle(data[i], data[j]) for j in same) / len(same)
        b = math.inf
        for other in set(labels) - {labels[i]}:
            members = [j for j in range(n) if labels[j] == other]
            mean = math.fsum(euclidean_oracle(data[i], data[j]) for j in members) / len(members)
            b = min(b, mean)
        denom = max(a, b)
        scores.append(0.0 if denom == 0 else (b - a) / denom)
    return math.fsum(scores) / n


def nearest_oracle(point, centroids) -> tuple[int, float]:
    best_index, best_dist = 0, euclidean_oracle(point, centroids[0])
    for j in range(1, len(centroids)):
        dist = euclidean_oracle(point, centroids[j])
        if dist < best_dist:
            best_index, best_dist = j, dist
    return best_index, best_dist


def lloyd_kmeans_oracle(data, k, init_indices, iterations: int = 100):
    """Exact Lloyd iterations from given initial rows; returns centroids."""
    data = np.asarray(data, dtype=np.float64)
    centroids = data[list(init_indices)].copy()
    for _ in range(iterations):
        labels = np.array([nearest_oracle(p, centroids)[0] for p in data])
        updated = centroids.copy()
        for j in range(k):
            members = data[labels == j]
            if len(members):
                updated[j] = members.mean(axis=0)
        if np.allclose(updated, centroids, atol=0, rtol=0):
            break
        centroids = updated
    return centroids


def kcenter_radius(data, selected) -> float:
    """Covering radius of a selected index set: max over points of min distance."""
    worst = 0.0
    for point in data:
        nearest = min(euclidean_oracle(point, data[j]) for j in selected)
        worst = max(worst, nearest)
    return worst


def kcenter_optimal_radius(data, size) -> float:
    """Brute-force optimal k-center radius over all subsets of the given size."""
    best = math.inf
    for subset in itertools.combinations(range(len(data)), size):
        best = min(best, kcenter_radius(data, subset))
    return best
