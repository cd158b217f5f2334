"""Perturbation-level sweep: choose the operating deletion count n.

For each sampled record and each level m in 1..n_max, one seeded variant
with m deleted words is embedded; the pool aggregate S_pool(m) is the mean
distance at level m and D_m its first difference (with S_pool(0) = 0). The
operating n is the level with the maximum relative embedding difference.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import InstructionRecord, composite_text
from .embed import EmbeddingProvider, embed_batch
from .perturb import PerturbationConfig, perturb
from .score import euclidean


class TuneError(ValueError):
    """A perturbation sweep cannot run on the given inputs."""


@dataclass(frozen=True)
class SweepLevel:
    n: int
    s_pool: float
    d: float
    truncated: int  # records whose level-n variant had to clamp deletions


@dataclass(frozen=True)
class SweepAggregate:
    n_max: int
    levels: tuple[SweepLevel, ...]
    chosen_n: int
    sample_ids: tuple[str, ...]

    def to_json(self) -> dict:
        return {
            "levels": [
                {"n": lv.n, "S_pool": lv.s_pool, "D": lv.d, "truncated": lv.truncated}
                for lv in self.levels
            ],
            "chosen_n": self.chosen_n,
            "K": len(self.sample_ids),
        }

    def curve_csv(self) -> str:
        """Plot-ready (n, D) curve of relative embedding differences."""
        lines = ["n,D"]
        lines.extend(f"{lv.n},{lv.d!r}" for lv in self.levels)
        return "\n".join(lines) + "\n"


def choose_n_from_differences(differences: Sequence[float]) -> int:
    """1-based argmax of the difference curve; exact ties resolve to the smallest n."""
    if not differences:
        raise TuneError("cannot choose n from an empty difference curve")
    best_n = 1
    best_d = differences[0]
    for i, d in enumerate(differences[1:], start=2):
        if d > best_d:
            best_n, best_d = i, d
    return best_n


def choose_n(aggregate: SweepAggregate) -> int:
    return choose_n_from_differences([level.d for level in aggregate.levels])


def sweep_perturbation(
    provider: EmbeddingProvider,
    sample: Sequence[InstructionRecord],
    n_max: int,
    seed: int,
) -> SweepAggregate:
    """Run the level sweep over a record sample and pick the operating n.

    Levels draw independent seeded variants (level m is not a superset of
    level m-1's deletions). Per-record distances accumulate in sample order,
    so the aggregate is independent of any internal scheduling.
    """
    if not sample:
        raise TuneError("sweep requires at least one record")
    if n_max < 1:
        raise TuneError(f"n_max must be >= 1, got {n_max}")

    distances = np.zeros((n_max, len(sample)), dtype=np.float64)
    truncated = np.zeros(n_max, dtype=np.int64)
    for col, record in enumerate(sample):
        inputs = [composite_text(record)]
        for level in range(1, n_max + 1):
            config = PerturbationConfig(n=level, variants=1, seed=seed)
            variant = perturb(record.instruction, config, scope=f"{record.id}@n{level}")[0]
            if variant.truncated:
                truncated[level - 1] += 1
            inputs.append(composite_text(record, variant.text))
        vectors = embed_batch(provider, inputs)
        for level in range(1, n_max + 1):
            distances[level - 1, col] = euclidean(vectors[level], vectors[0])

    s_pool = distances.mean(axis=1)
    diffs = np.diff(np.concatenate(([0.0], s_pool)))
    levels = tuple(
        SweepLevel(n=m + 1, s_pool=float(s_pool[m]), d=float(diffs[m]), truncated=int(truncated[m]))
        for m in range(n_max)
    )
    return SweepAggregate(
        n_max=n_max,
        levels=levels,
        chosen_n=choose_n_from_differences([lv.d for lv in levels]),
        sample_ids=tuple(record.id for record in sample),
    )
