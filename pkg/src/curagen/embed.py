"""Embedding providers: analytic mock, precomputed file store, and remote HTTP.

All providers expose the same surface (name, dim, modality, embed) and may
be wrapped by a persistent JSONL-backed cache keyed by content hashes of
(provider name, input string), so perturbation variants are cached
individually. Vectors are float64 throughout; JSON serialization uses
Python's repr round-trip, so cached values are bit-equal to fresh ones.
"""
from __future__ import annotations

import hashlib
import json
import threading
import time
from pathlib import Path
from typing import Callable, Protocol, Sequence, runtime_checkable

import numpy as np
import requests

from .perturb import tokenize_words
from .seeding import rng_for


class EmbeddingError(RuntimeError):
    """An embedding input or store violates its contract."""


class ProviderError(EmbeddingError):
    """A provider failed to produce vectors (connection, protocol, or lookup)."""


MODALITY_TEXT = "text-only"
MODALITY_TEXT_IMAGE = "text+image-ref"


@runtime_checkable
class EmbeddingProvider(Protocol):
    """Anything that maps input strings to fixed-dimension real vectors."""

    name: str
    dim: int
    modality: str

    def embed(self, inputs: Sequence[str]) -> np.ndarray: ...


def store_key(provider_name: str, text: str) -> str:
    """Content hash identifying one (provider, input) pair in a store."""
    payload = provider_name.encode("utf-8") + b"\x00" + text.encode("utf-8")
    return hashlib.sha256(payload).hexdigest()


def embed_batch(provider: EmbeddingProvider, inputs: Sequence[str]) -> np.ndarray:
    """Embed a batch through a provider, enforcing the batch contract.

    Output row i corresponds to inputs[i]; every row has the provider's
    declared dimension and only finite components.
    """
    if len(inputs) == 0:
        raise EmbeddingError("embed_batch requires a nonempty input sequence")
    for i, text in enumerate(inputs):
        if text == "":
            raise EmbeddingError(f"embed_batch input {i} is empty")
    vectors = np.asarray(provider.embed(list(inputs)), dtype=np.float64)
    if vectors.shape != (len(inputs), provider.dim):
        raise ProviderError(
            f"provider '{provider.name}' returned shape {vectors.shape}, "
            f"expected {(len(inputs), provider.dim)}"
        )
    if not np.all(np.isfinite(vectors)):
        raise ProviderError(f"provider '{provider.name}' returned non-finite components")
    return vectors


# ---------------------------------------------------------------------------
# Analytic mock provider
# ---------------------------------------------------------------------------


def mock_word_vector(word: str, dim: int, seed: int) -> np.ndarray:
    """Seeded pseudo-random direction on the unit sphere for one word."""
    raw = rng_for("mock-word", seed, word).standard_normal(dim)
    return raw / np.linalg.norm(raw)


def mock_embed(text: str, dim: int, seed: int) -> np.ndarray:
    """Sum of seeded unit word vectors over the text's whitespace words.

    Because the embedding is an order-free sum of per-word unit vectors,
    deleting a word multiset W moves the embedding by exactly the sum of
    the deleted words' unit vectors; tests exploit this as a closed-form
    distance oracle.
    """
    if dim < 8:
        raise EmbeddingError(f"mock embedding dim must be >= 8, got {dim}")
    words = tokenize_words(text)
    if not words:
        raise EmbeddingError("mock_embed input has no word tokens")
    total = np.zeros(dim, dtype=np.float64)
    for word in words:
        total += mock_word_vector(word, dim, seed)
    return total


class MockProvider:
    """Deterministic analytic test double for embedding models.

    Word directions are memoized per provider instance; the mapping is a
    pure function of (seed, word), so memoization cannot change results.
    """

    def __init__(self, dim: int = 64, seed: int = 0):
        if dim < 8:
            raise EmbeddingError(f"mock embedding dim must be >= 8, got {dim}")
        self.dim = dim
        self.seed = seed
        self.name = f"mock:d{dim}:s{seed}"
        self.modality = MODALITY_TEXT
        self._word_vectors: dict[str, np.ndarray] = {}

    def word_vector(self, word: str) -> np.ndarray:
        vec = self._word_vectors.get(word)
        if vec is None:
            vec = mock_word_vector(word, self.dim, self.seed)
            self._word_vectors[word] = vec
        return vec

    def embed(self, inputs: Sequence[str]) -> np.ndarray:
        out = np.zeros((len(inputs), self.dim), dtype=np.float64)
        for row, text in enumerate(inputs):
            words = tokenize_words(text)
            if not words:
                raise EmbeddingError(f"input {row} has no word tokens")
            for word in words:
                out[row] += self.word_vector(word)
        return out


# ---------------------------------------------------------------------------
# Precomputed store + file provider
# ---------------------------------------------------------------------------


class EmbeddingStore:
    """Keyed vector store with an optional JSONL backing file.

    All stored vectors share one dimension; writes are serialized so
    concurrent batch embedders cannot interleave file lines.
    """

    def __init__(self, dim: int | None = None, path: str | Path | None = None):
        self.dim = dim
        self.path = Path(path) if path is not None else None
        self.vectors: dict[str, np.ndarray] = {}
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self.vectors)

    def __contains__(self, key: str) -> bool:
        return key in self.vectors

    def get(self, key: str) -> np.ndarray | None:
        return self.vectors.get(key)

    def put(self, key: str, vector: np.ndarray, *, persist: bool = True) -> None:
        vector = np.asarray(vector, dtype=np.float64)
        if vector.ndim != 1:
            raise EmbeddingError(f"store vectors must be 1-D, got shape {vector.shape}")
        if not np.all(np.isfinite(vector)):
            raise EmbeddingError(f"store vector for key {key} has non-finite components")
        with self._lock:
            if self.dim is None:
                self.dim = int(vector.shape[0])
            elif vector.shape[0] != self.dim:
                raise EmbeddingError(
                    f"store dim mismatch: expected {self.dim}, got {vector.shape[0]}"
                )
            if key in self.vectors:
                return
            self.vectors[key] = vector
            if persist and self.path is not None:
                line = json.dumps({"key": key, "vector": vector.tolist()})
                with open(self.path, "a", encoding="utf-8") as handle:
                    handle.write(line + "\n")


def load_precomputed(path: str | Path) -> EmbeddingStore:
    """Load a JSONL store of ``{"key": ..., "vector": [...]}`` lines.

    Errors on ragged dimensions or non-finite components, naming the line.
    """
    path = Path(path)
    store = EmbeddingStore(path=path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise EmbeddingError(f"cannot read embedding store {path}: {exc}") from exc
    for line_no, line in enumerate(text.splitlines(), start=1):
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise EmbeddingError(f"{path}: line {line_no}: malformed JSON ({exc.msg})") from exc
        if not isinstance(obj, dict) or "key" not in obj or "vector" not in obj:
            raise EmbeddingError(f"{path}: line {line_no}: expected object with key and vector")
        vector = np.asarray(obj["vector"], dtype=np.float64)
        if vector.ndim != 1 or vector.shape[0] == 0:
            raise EmbeddingError(f"{path}: line {line_no}: vector must be a nonempty array")
        if not np.all(np.isfinite(vector)):
            raise EmbeddingError(f"{path}: line {line_no}: non-finite vector component")
        if store.dim is not None and vector.shape[0] != store.dim:
            raise EmbeddingError(
                f"{path}: line {line_no}: dimension mismatch "
                f"(expected {store.dim}, got {vector.shape[0]})"
            )
        store.put(str(obj["key"]), vector, persist=False)
    return store


class FileProvider:
    """Serves embeddings from a precomputed store; never computes."""

    def __init__(
        self,
        store: EmbeddingStore,
        name: str = "file",
        modality: str = MODALITY_TEXT,
    ):
        if store.dim is None:
            raise EmbeddingError("file provider requires a store with at least one vector")
        self.store = store
        self.name = name
        self.dim = int(store.dim)
        self.modality = modality

    def embed(self, inputs: Sequence[str]) -> np.ndarray:
        rows = []
        for text in inputs:
            key = store_key(self.name, text)
            vector = self.store.get(key)
            if vector is None:
                raise ProviderError(
                    f"file provider '{self.name}': key {key} not found in precomputed store"
                )
            rows.append(vector)
        return np.stack(rows)


# ---------------------------------------------------------------------------
# Remote provider (wire protocol shared with the sidecar)
# ---------------------------------------------------------------------------


class RemoteProvider:
    """HTTP provider speaking POST /v1/embed, GET /v1/info, GET /healthz.

    Connection failures, non-success statuses, and dimension mismatches are
    all retried up to ``retries`` times, then abort with ProviderError.
    """

    def __init__(
        self,
        base_url: str,
        retries: int = 3,
        timeout: float = 30.0,
        backoff: float = 0.2,
        session: requests.Session | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.retries = retries
        self.timeout = timeout
        self.backoff = backoff
        self._session = session or requests.Session()
        self.name, self.dim, self.modality = self._call(
            "GET", "/v1/info", None, self._validate_info
        )

    @staticmethod
    def _validate_info(payload: object) -> tuple[str, int, str]:
        if not isinstance(payload, dict):
            raise ValueError("info payload is not a JSON object")
        try:
            return str(payload["name"]), int(payload["dim"]), str(payload["modality"])
        except (KeyError, TypeError, ValueError):
            raise ValueError(f"invalid /v1/info payload: {payload!r}") from None

    def _call(self, method: str, route: str, body: dict | None, validate: Callable):
        url = self.base_url + route
        last_error = ""
        for attempt in range(self.retries + 1):
            if attempt:
                time.sleep(self.backoff * attempt)
            try:
                response = self._session.request(method, url, json=body, timeout=self.timeout)
            except requests.RequestException as exc:
                last_error = f"connection failure: {exc}"
                continue
            if not 200 <= response.status_code < 300:
                try:
                    detail = str(response.json().get("error", ""))
                except ValueError:
                    detail = ""
                last_error = f"HTTP {response.status_code}: {detail or response.reason}"
                continue
            try:
                payload = response.json()
            except ValueError:
                last_error = "response body is not JSON"
                continue
            try:
                return validate(payload)
            except ValueError as exc:
                last_error = str(exc)
                continue
        raise ProviderError(
            f"remote provider {url} failed after {self.retries + 1} attempts: {last_error}"
        )

    def embed(self, inputs: Sequence[str]) -> np.ndarray:
        expected = len(inputs)

        def validate(payload: object) -> np.ndarray:
            if not isinstance(payload, dict):
                raise ValueError("embed payload is not a JSON object")
            vectors = payload.get("vectors")
            dim = payload.get("dim")
            if dim != self.dim:
                raise ValueError(f"dimension mismatch: declared {self.dim}, response {dim!r}")
            if not isinstance(vectors, list) or len(vectors) != expected:
                raise ValueError(f"expected {expected} vectors, got {vectors!r:.80}")
            array = np.asarray(vectors, dtype=np.float64)
            if array.shape != (expected, self.dim):
                raise ValueError(f"vector rows have shape {array.shape}")
            return array

        return self._call("POST", "/v1/embed", {"inputs": list(inputs)}, validate)


# ---------------------------------------------------------------------------
# Wrappers
# ---------------------------------------------------------------------------


class CachingProvider:
    """Transparent persistent cache in front of another provider.

    Misses are embedded through the inner provider in input order and
    written back under content-hash keys; hits bypass it entirely, so
    cached and fresh results are bit-equal.
    """

    def __init__(self, inner: EmbeddingProvider, store: EmbeddingStore):
        self.inner = inner
        self.store = store
        self.name = inner.name
        self.dim = inner.dim
        self.modality = inner.modality

    def embed(self, inputs: Sequence[str]) -> np.ndarray:
        keys = [store_key(self.name, text) for text in inputs]
        miss_rows = [i for i, key in enumerate(keys) if key not in self.store]
        if miss_rows:
            fresh = embed_batch(self.inner, [inputs[i] for i in miss_rows])
            for row, vector in zip(miss_rows, fresh):
                self.store.put(keys[row], vector)
        return np.stack([self.store.get(key) for key in keys])


class NormalizedProvider:
    """Opt-in L2 normalization of another provider's output."""

    def __init__(self, inner: EmbeddingProvider):
        self.inner = inner
        self.name = f"{inner.name}+l2norm"
        self.dim = inner.dim
        self.modality = inner.modality

    def embed(self, inputs: Sequence[str]) -> np.ndarray:
        vectors = np.asarray(self.inner.embed(inputs), dtype=np.float64)
        norms = np.linalg.norm(vectors, axis=1, keepdims=True)
        if np.any(norms == 0.0):
            raise ProviderError(f"provider '{self.inner.name}' returned a zero vector")
        return vectors / norms
