"""Embedding backends behind the sidecar.

Two families are supported through one model-identifier string:

* ``hash:<dim>`` — a dependency-free feature-hashing embedder, deterministic
  and instant to load; the default for tests and offline runs.
* anything else — a sentence-transformers model name (for example
  ``BAAI/bge-large-en-v1.5``), loaded lazily on first use.
"""
from __future__ import annotations

import hashlib
from typing import Protocol, Sequence

import numpy as np


class BackendError(RuntimeError):
    """The backend cannot load or cannot embed the given inputs."""


class EmbeddingBackend(Protocol):
    name: str
    dim: int
    modality: str

    def embed(self, inputs: Sequence[str]) -> list[list[float]]: ...


class HashingBackend:
    """Signed feature-hashing bag of words, L2-normalized.

    A pure function of the input text: repeated inputs are bit-equal and
    batch composition cannot influence a row, which makes the protocol's
    determinism and batch-split bounds exact. The pooling setting does not
    apply here; the bag sum is the pooling.
    """

    def __init__(self, dim: int):
        if dim < 8:
            raise BackendError(f"hash backend dim must be >= 8, got {dim}")
        self.dim = dim
        self.name = f"hash:{dim}"
        self.modality = "text-only"

    def _hash(self, token: str) -> tuple[int, float]:
        digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
        value = int.from_bytes(digest, "big")
        return value % self.dim, 1.0 if (value >> 63) & 1 else -1.0

    def embed(self, inputs: Sequence[str]) -> list[list[float]]:
        rows = []
        for text in inputs:
            tokens = text.lower().split()
            if not tokens:
                raise BackendError("input has no tokens")
            vector = np.zeros(self.dim, dtype=np.float64)
            for token in tokens:
                index, sign = self._hash(token)
                vector[index] += sign
            norm = float(np.linalg.norm(vector))
            if norm == 0.0:
                vector[0] = 1.0
                norm = 1.0
            rows.append((vector / norm).tolist())
        return rows


class SentenceTransformerBackend:
    """Real sentence-embedding model with configurable pooling."""

    def __init__(self, model_id: str, device: str = "cpu", pooling: str = "mean"):
        try:
            from sentence_transformers import SentenceTransformer
        except ImportError as exc:
            raise BackendError(
                "sentence-transformers is not installed; install the 'model' extra "
                "or use a hash:<dim> model identifier"
            ) from exc
        try:
            self._model = SentenceTransformer(model_id, device=device)
        except Exception as exc:
            raise BackendError(f"cannot load model '{model_id}': {exc}") from exc
        self.name = model_id
        self.pooling = pooling
        self.modality = "text-only"
        self.dim = int(self._model.get_sentence_embedding_dimension())

    def embed(self, inputs: Sequence[str]) -> list[list[float]]:
        if self.pooling == "cls":
            token_rows = self._model.encode(
                list(inputs), output_value="token_embeddings", convert_to_numpy=True
            )
            vectors = np.stack([np.asarray(row)[0] for row in token_rows])
        else:
            vectors = self._model.encode(list(inputs), convert_to_numpy=True)
        return np.asarray(vectors, dtype=np.float64).tolist()


def load_backend(model_id: str, device: str = "cpu", pooling: str = "mean") -> EmbeddingBackend:
    if model_id.startswith("hash:"):
        try:
            dim = int(model_id.split(":", 1)[1])
        except ValueError:
            raise BackendError(f"invalid hash model identifier '{model_id}'") from None
        return HashingBackend(dim)
    return SentenceTransformerBackend(model_id, device=device, pooling=pooling)
