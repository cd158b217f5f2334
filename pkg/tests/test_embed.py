from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import numpy as np
import pytest

from curagen.embed import (
    CachingProvider,
    EmbeddingError,
    EmbeddingStore,
    FileProvider,
    MockProvider,
    NormalizedProvider,
    ProviderError,
    RemoteProvider,
    embed_batch,
    load_precomputed,
    mock_embed,
    mock_word_vector,
    store_key,
)
from conftest import HashStubProvider


def test_mock_is_deterministic_per_input():
    provider = MockProvider(dim=16, seed=0)
    vectors = embed_batch(provider, ["a b", "a b"])
    assert np.array_equal(vectors[0], vectors[1])


def test_single_word_mock_vector_is_unit_norm():
    vector = mock_embed("w", 32, seed=4)
    assert abs(np.linalg.norm(vector) - 1.0) <= 1e-9


def test_mock_sum_is_order_free():
    assert np.allclose(mock_embed("a b", 16, 0), mock_embed("b a", 16, 0), atol=1e-12)


def test_single_deletion_distance_is_one():
    a = mock_embed("a b c", 16, 7)
    b = mock_embed("a b", 16, 7)
    assert abs(float(np.linalg.norm(a - b)) - 1.0) <= 1e-9


def test_mock_isometry_matches_deleted_word_sum():
    # Distance between a text and a deletion-variant equals the norm of the
    # deleted words' summed unit vectors, recomputed independently here.
    words = ["red", "green", "blue", "cyan", "red", "plume"]
    deleted = [1, 4]  # delete "green" and the second "red"
    kept = [w for i, w in enumerate(words) if i not in deleted]
    full = mock_embed(" ".join(words), 24, seed=3)
    part = mock_embed(" ".join(kept), 24, seed=3)
    expected = np.zeros(24)
    for i in deleted:
        expected += mock_word_vector(words[i], 24, seed=3)
    assert abs(float(np.linalg.norm(full - part)) - float(np.linalg.norm(expected))) <= 1e-9


def test_mock_rejects_empty_text_and_small_dim():
    with pytest.raises(EmbeddingError):
        mock_embed("   ", 16, 0)
    with pytest.raises(EmbeddingError):
        mock_embed("x", 7, 0)


def test_embed_batch_preserves_order():
    provider = MockProvider(dim=16, seed=0)
    texts = [f"word{i} tail" for i in range(20)]
    batch = embed_batch(provider, texts)
    for i, text in enumerate(texts):
        assert np.array_equal(batch[i], embed_batch(provider, [text])[0])


def test_embed_batch_rejects_empty_inputs():
    provider = MockProvider(dim=16, seed=0)
    with pytest.raises(EmbeddingError):
        embed_batch(provider, [])
    with pytest.raises(EmbeddingError):
        embed_batch(provider, ["ok", ""])


# ---------------------------------------------------------------------------
# Precomputed store + file provider
# ---------------------------------------------------------------------------


def _write_store(path, rows):
    path.write_text("".join(json.dumps(r) + "\n" for r in rows), encoding="utf-8")
    return path


def test_load_precomputed_uniform_dim(tmp_path):
    path = _write_store(
        tmp_path / "store.jsonl",
        [{"key": "k1", "vector": [1, 2, 3, 4]}, {"key": "k2", "vector": [5, 6, 7, 8]}],
    )
    store = load_precomputed(path)
    assert store.dim == 4
    assert len(store) == 2


def test_load_precomputed_rejects_ragged_dims(tmp_path):
    path = _write_store(
        tmp_path / "store.jsonl",
        [{"key": "k1", "vector": [1, 2, 3, 4]}, {"key": "k2", "vector": [5, 6, 7, 8, 9]}],
    )
    with pytest.raises(EmbeddingError, match="line 2.*mismatch"):
        load_precomputed(path)


def test_load_precomputed_rejects_non_finite(tmp_path):
    path = _write_store(tmp_path / "store.jsonl", [{"key": "k1", "vector": [1, None, 3]}])
    path.write_text(path.read_text().replace("null", "NaN"), encoding="utf-8")
    with pytest.raises(EmbeddingError, match="non-finite"):
        load_precomputed(path)


def test_file_provider_missing_key_names_hash(tmp_path):
    key = store_key("precomp", "known text")
    path = _write_store(tmp_path / "store.jsonl", [{"key": key, "vector": [1, 2, 3, 4]}])
    provider = FileProvider(load_precomputed(path), name="precomp")
    assert np.array_equal(embed_batch(provider, ["known text"])[0], [1, 2, 3, 4])
    missing_key = store_key("precomp", "unknown text")
    with pytest.raises(ProviderError, match=missing_key):
        embed_batch(provider, ["unknown text"])


def test_cache_transparency(tmp_path):
    inner = HashStubProvider(dim=10)
    cache_path = tmp_path / "cache.jsonl"
    cached = CachingProvider(inner, EmbeddingStore(path=cache_path))
    texts = ["one two", "three four", "one two"]
    fresh = embed_batch(inner, texts)
    first = embed_batch(cached, texts)
    assert np.allclose(first, fresh, atol=1e-9)

    # A brand-new provider reading the persisted cache returns bit-equal rows.
    reloaded = CachingProvider(HashStubProvider(dim=10), load_precomputed(cache_path))
    second = embed_batch(reloaded, texts)
    assert np.array_equal(first, second)


def test_cache_only_computes_misses(tmp_path):
    calls: list[list[str]] = []

    class CountingProvider(HashStubProvider):
        def embed(self, inputs):
            calls.append(list(inputs))
            return super().embed(inputs)

    cached = CachingProvider(CountingProvider(dim=10), EmbeddingStore())
    embed_batch(cached, ["a", "b"])
    embed_batch(cached, ["b", "c"])
    assert calls == [["a", "b"], ["c"]]


def test_normalized_provider_unit_norm():
    provider = NormalizedProvider(MockProvider(dim=16, seed=0))
    vectors = embed_batch(provider, ["a b c", "d e"])
    assert np.allclose(np.linalg.norm(vectors, axis=1), 1.0, atol=1e-12)


# ---------------------------------------------------------------------------
# Remote provider against a scripted local server
# ---------------------------------------------------------------------------


class _ScriptedServer:
    """Local HTTP server whose /v1/embed behavior follows a per-call script."""

    def __init__(self, dim: int = 4, embed_script: list[str] | None = None):
        self.dim = dim
        self.embed_script = list(embed_script or [])
        self.embed_calls = 0
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def _send(self, code: int, payload: dict):
                body = json.dumps(payload).encode()
                self.send_response(code)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def do_GET(self):
                if self.path == "/healthz":
                    self._send(200, {"status": "ok"})
                elif self.path == "/v1/info":
                    self._send(200, {"name": "scripted", "dim": outer.dim, "modality": "text-only"})
                else:
                    self._send(404, {"error": "not found"})

            def do_POST(self):
                if self.path != "/v1/embed":
                    self._send(404, {"error": "not found"})
                    return
                length = int(self.headers["Content-Length"])
                inputs = json.loads(self.rfile.read(length))["inputs"]
                action = (
                    outer.embed_script[outer.embed_calls]
                    if outer.embed_calls < len(outer.embed_script)
                    else "ok"
                )
                outer.embed_calls += 1
                if action == "error500":
                    self._send(500, {"error": "scripted failure"})
                elif action == "short":
                    self._send(
                        200,
                        {"dim": outer.dim, "vectors": [[0.0] * (outer.dim - 1) for _ in inputs]},
                    )
                else:
                    vectors = [
                        [float(len(text)), float(i), 1.0, 2.0][: outer.dim]
                        for i, text in enumerate(inputs)
                    ]
                    self._send(200, {"dim": outer.dim, "vectors": vectors})

        self.server = HTTPServer(("127.0.0.1", 0), Handler)
        self.url = f"http://127.0.0.1:{self.server.server_port}"
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)
        self.thread.start()

    def close(self):
        self.server.shutdown()
        self.server.server_close()


def test_remote_provider_round_trip():
    server = _ScriptedServer(dim=4)
    try:
        provider = RemoteProvider(server.url, retries=0)
        assert (provider.name, provider.dim, provider.modality) == ("scripted", 4, "text-only")
        vectors = embed_batch(provider, ["abc", "de"])
        assert vectors.shape == (2, 4)
        assert vectors[0][0] == 3.0
    finally:
        server.close()


def test_remote_provider_retries_transient_failure():
    server = _ScriptedServer(dim=4, embed_script=["error500", "ok"])
    try:
        provider = RemoteProvider(server.url, retries=2, backoff=0.0)
        vectors = embed_batch(provider, ["abc"])
        assert vectors.shape == (1, 4)
        assert server.embed_calls == 2
    finally:
        server.close()


def test_remote_provider_aborts_after_retry_budget():
    server = _ScriptedServer(dim=4, embed_script=["error500"] * 10)
    try:
        provider = RemoteProvider(server.url, retries=2, backoff=0.0)
        with pytest.raises(ProviderError, match="3 attempts"):
            embed_batch(provider, ["abc"])
        assert server.embed_calls == 3
    finally:
        server.close()


def test_remote_provider_rejects_dimension_mismatch():
    server = _ScriptedServer(dim=4, embed_script=["short"] * 10)
    try:
        provider = RemoteProvider(server.url, retries=1, backoff=0.0)
        with pytest.raises(ProviderError):
            embed_batch(provider, ["abc"])
    finally:
        server.close()


def test_remote_provider_connection_failure():
    with pytest.raises(ProviderError, match="connection failure"):
        RemoteProvider("http://127.0.0.1:9", retries=1, backoff=0.0)
