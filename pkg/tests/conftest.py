from __future__ import annotations

import json
from pathlib import Path
from typing import Sequence

import numpy as np
import pytest

from curagen.corpus import InstructionRecord
from curagen.seeding import rng_for


class StubProvider:
    """Fixed mapping from input text to vector; fails on unknown inputs."""

    def __init__(self, mapping: dict[str, Sequence[float]], name: str = "stub"):
        self.mapping = {text: np.asarray(vec, dtype=np.float64) for text, vec in mapping.items()}
        dims = {vec.shape[0] for vec in self.mapping.values()}
        assert len(dims) == 1
        self.dim = dims.pop()
        self.name = name
        self.modality = "text-only"

    def embed(self, inputs):
        return np.stack([self.mapping[text] for text in inputs])


class HashStubProvider:
    """Arbitrary deterministic vectors per input text (not word-structured)."""

    def __init__(self, dim: int = 12, name: str = "hash-stub"):
        self.dim = dim
        self.name = name
        self.modality = "text-only"

    def embed(self, inputs):
        return np.stack([rng_for("hash-stub", text).standard_normal(self.dim) for text in inputs])


class TransformedProvider:
    """Scale and translate another provider's output (test double for score laws)."""

    def __init__(self, inner, scale: float = 1.0, offset: np.ndarray | None = None):
        self.inner = inner
        self.scale = scale
        self.offset = np.zeros(inner.dim) if offset is None else np.asarray(offset, dtype=float)
        self.name = f"{inner.name}*{scale}+t"
        self.dim = inner.dim
        self.modality = inner.modality

    def embed(self, inputs):
        return np.asarray(self.inner.embed(inputs), dtype=np.float64) * self.scale + self.offset


def write_corpus(path: Path, rows: Sequence[dict]) -> Path:
    path.write_text("".join(json.dumps(row) + "\n" for row in rows), encoding="utf-8")
    return path


def make_records(count: int, words_per_instruction: int = 8, seed: int = 0) -> list[InstructionRecord]:
    """Records whose instructions are distinct multi-word strings."""
    rng = rng_for("make-records", seed)
    records = []
    for i in range(count):
        words = [f"w{int(rng.integers(0, 10_000)):05d}" for _ in range(words_per_instruction)]
        records.append(
            InstructionRecord(id=f"r{i:05d}", instruction=" ".join(words), answer=f"a{i}")
        )
    return records


@pytest.fixture
def corpus_rows() -> list[dict]:
    return [
        {"id": "a", "instruction": "classify the scene", "answer": "forest"},
        {"id": "b", "instruction": "count the planes", "answer": "3", "image_ref": "img/1.png"},
        {"id": "c", "instruction": "where is the harbor", "answer": "", "tag": "vqa"},
    ]
