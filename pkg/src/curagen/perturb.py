"""Seeded word-deletion perturbation of instruction texts."""
from __future__ import annotations

from dataclasses import dataclass

from .seeding import rng_for


class PerturbError(ValueError):
    """An instruction cannot be perturbed."""


@dataclass(frozen=True)
class PerturbationConfig:
    """How many words to delete (n), how many variants per entry, and the seed."""

    n: int
    variants: int = 5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n < 0:
            raise PerturbError(f"deletion count n must be >= 0, got {self.n}")
        if self.variants < 1:
            raise PerturbError(f"variants must be >= 1, got {self.variants}")


@dataclass(frozen=True)
class PerturbedVariant:
    record_id: str
    variant_index: int
    deleted_positions: tuple[int, ...]
    text: str
    truncated: bool


def tokenize_words(text: str) -> list[str]:
    """Split on runs of Unicode whitespace, discarding empty tokens."""
    return text.split()


def perturb(
    instruction: str, config: PerturbationConfig, *, scope: str
) -> list[PerturbedVariant]:
    """Generate ``config.variants`` word-deletion variants of an instruction.

    Each variant deletes ``min(n, word_count - 1)`` distinct word positions
    drawn uniformly without replacement from a generator seeded by
    ``(seed, scope, variant_index)``, so per-record perturbations are
    independent of corpus order. An instruction of ``word_count <= n`` keeps
    exactly one seeded-random surviving word and is flagged truncated.
    Survivors are rejoined with single spaces; a variant with zero deletions
    returns the instruction verbatim so downstream embeddings of the
    unperturbed case are byte-identical to the original.
    """
    words = tokenize_words(instruction)
    if not words:
        raise PerturbError(f"instruction for scope '{scope}' has no word tokens")
    word_count = len(words)
    delete_count = min(config.n, word_count - 1)
    truncated = config.n > word_count - 1 and config.n > 0

    variants: list[PerturbedVariant] = []
    for variant_index in range(config.variants):
        if delete_count == 0:
            variants.append(
                PerturbedVariant(
                    record_id=scope,
                    variant_index=variant_index,
                    deleted_positions=(),
                    text=instruction,
                    truncated=truncated,
                )
            )
            continue
        rng = rng_for("perturb", config.seed, scope, variant_index)
        drawn = rng.choice(word_count, size=delete_count, replace=False)
        positions = tuple(sorted(int(p) for p in drawn))
        deleted = set(positions)
        kept = [word for i, word in enumerate(words) if i not in deleted]
        variants.append(
            PerturbedVariant(
                record_id=scope,
                variant_index=variant_index,
                deleted_positions=positions,
                text=" ".join(kept),
                truncated=truncated,
            )
        )
    return variants
