"""Pipeline configuration and stage orchestration.

The full flow is ingest -> embed -> sweep-k -> cluster -> tune-n -> score ->
select, each stage independently invocable on prior-stage artifacts. All
artifacts are JSON/JSONL written with sorted keys, so re-running an
identical config over unchanged inputs reproduces them byte for byte
(summary timings excepted).
"""
from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from . import cluster as cluster_mod
from . import select as select_mod
from .corpus import Corpus, composite_text, load_corpus
from .embed import (
    CachingProvider,
    EmbeddingProvider,
    EmbeddingStore,
    MockProvider,
    FileProvider,
    NormalizedProvider,
    RemoteProvider,
    embed_batch,
    load_precomputed,
)
from .perturb import PerturbationConfig, perturb
from .score import EntryScore, rank_cluster, score_cluster
from .seeding import rng_for
from .tune import sweep_perturbation


class ConfigError(ValueError):
    """A pipeline configuration is invalid."""


class ArtifactError(RuntimeError):
    """A required prior-stage artifact is missing or unreadable."""


class StageError(RuntimeError):
    """Carries the failing stage's name alongside the underlying cause."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


STAGE_ORDER = ("ingest", "embed", "sweep-k", "cluster", "tune-n", "score", "select")

PROVIDER_TYPES = ("mock", "file", "remote")
METHODS = (select_mod.METHOD_TOPK, select_mod.METHOD_RANDOM, select_mod.METHOD_KCENTER)

EMBED_CHUNK = 256


@dataclass(frozen=True)
class ProviderSpec:
    type: str
    dim: int = 64
    seed: int = 0
    path: str | None = None
    url: str | None = None
    name: str | None = None
    normalize: bool = False
    cache: bool = True
    retries: int = 3

    def validate(self, role: str) -> None:
        if self.type not in PROVIDER_TYPES:
            raise ConfigError(f"{role}: unknown provider type '{self.type}'")
        if self.type == "file" and not self.path:
            raise ConfigError(f"{role}: file provider requires 'path'")
        if self.type == "remote" and not self.url:
            raise ConfigError(f"{role}: remote provider requires 'url'")
        if self.type == "mock" and self.dim < 8:
            raise ConfigError(f"{role}: mock provider dim must be >= 8")

    def to_json(self) -> dict[str, Any]:
        return {
            "type": self.type,
            "dim": self.dim,
            "seed": self.seed,
            "path": self.path,
            "url": self.url,
            "name": self.name,
            "normalize": self.normalize,
            "cache": self.cache,
            "retries": self.retries,
        }


_PROVIDER_KEYS = set(ProviderSpec.__dataclass_fields__)


def provider_spec_from_dict(raw: dict[str, Any], role: str) -> ProviderSpec:
    unknown = set(raw) - _PROVIDER_KEYS
    if unknown:
        raise ConfigError(f"{role}: unknown provider fields {sorted(unknown)}")
    if "type" not in raw:
        raise ConfigError(f"{role}: provider spec requires 'type'")
    spec = ProviderSpec(**raw)
    spec.validate(role)
    return spec


def provider_spec_from_string(text: str, role: str) -> ProviderSpec:
    """Parse CLI shorthand like ``mock:dim=32,seed=7`` or ``remote:url=http://...``."""
    head, _, rest = text.partition(":")
    raw: dict[str, Any] = {"type": head.strip()}
    if rest:
        for pair in rest.split(","):
            key, sep, value = pair.partition("=")
            if not sep:
                raise ConfigError(f"{role}: expected key=value in provider spec, got '{pair}'")
            key = key.strip()
            value = value.strip()
            if value.lower() in ("true", "false"):
                raw[key] = value.lower() == "true"
            elif value.lstrip("-").isdigit():
                raw[key] = int(value)
            else:
                raw[key] = value
    return provider_spec_from_dict(raw, role)


_CONFIG_DEFAULTS: dict[str, Any] = {
    "output_dir": "curagen_out",
    "cluster_provider": {"type": "mock"},
    "score_provider": {"type": "mock"},
    "k_min": 2,
    "k_max": 16,
    "batch_size": 1024,
    "iterations": 100,
    "n_init": 10,
    "silhouette_sample_cap": 5000,
    "variants": 5,
    "n": "auto",
    "tune_sample": 512,
    "tune_n_max": 8,
    "method": select_mod.METHOD_TOPK,
    "quota": 15000,
    "size": 1000,
    "per_cluster_random": False,
    "workers": 1,
    "skip_errors": False,
    "dump_variants": False,
}


@dataclass(frozen=True)
class PipelineConfig:
    corpus: str
    seed: int
    output_dir: str
    cluster_provider: ProviderSpec
    score_provider: ProviderSpec
    k_min: int
    k_max: int
    batch_size: int
    iterations: int
    n_init: int
    silhouette_sample_cap: int
    variants: int
    n: int | str  # deletion count, or "auto" to tune it
    tune_sample: int
    tune_n_max: int
    method: str
    quota: int
    size: int
    per_cluster_random: bool
    workers: int
    skip_errors: bool
    dump_variants: bool

    def validate(self) -> None:
        if not self.corpus:
            raise ConfigError("corpus path is required")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise ConfigError("seed is required and must be an integer (no implicit entropy)")
        self.cluster_provider.validate("cluster_provider")
        self.score_provider.validate("score_provider")
        if not 2 <= self.k_min <= self.k_max:
            raise ConfigError(f"need 2 <= k_min <= k_max, got [{self.k_min}, {self.k_max}]")
        for name in (
            "batch_size",
            "iterations",
            "n_init",
            "silhouette_sample_cap",
            "variants",
            "tune_sample",
            "tune_n_max",
            "quota",
            "size",
            "workers",
        ):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if self.n != "auto" and (not isinstance(self.n, int) or isinstance(self.n, bool) or self.n < 0):
            raise ConfigError(f"n must be 'auto' or a non-negative integer, got {self.n!r}")
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got '{self.method}'")

    def semantic_json(self) -> dict[str, Any]:
        """Config fields that determine artifact content (paths and worker count excluded)."""
        return {
            "seed": self.seed,
            "cluster_provider": self.cluster_provider.to_json(),
            "score_provider": self.score_provider.to_json(),
            "k_min": self.k_min,
            "k_max": self.k_max,
            "batch_size": self.batch_size,
            "iterations": self.iterations,
            "n_init": self.n_init,
            "silhouette_sample_cap": self.silhouette_sample_cap,
            "variants": self.variants,
            "n": self.n,
            "tune_sample": self.tune_sample,
            "tune_n_max": self.tune_n_max,
            "method": self.method,
            "quota": self.quota,
            "size": self.size,
            "per_cluster_random": self.per_cluster_random,
            "skip_errors": self.skip_errors,
            "dump_variants": self.dump_variants,
        }

    def fingerprint(self) -> str:
        canonical = json.dumps(self.semantic_json(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def config_from_dict(raw: dict[str, Any], *, env_seed: str | None = None) -> PipelineConfig:
    known = set(_CONFIG_DEFAULTS) | {"corpus", "seed"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")

    merged: dict[str, Any] = dict(_CONFIG_DEFAULTS)
    merged.update({k: v for k, v in raw.items() if v is not None})

    corpus = merged.get("corpus")
    if not corpus:
        raise ConfigError("corpus path is required")

    seed = merged.get("seed")
    if seed is None and env_seed is not None:
        try:
            seed = int(env_seed)
        except ValueError:
            raise ConfigError(f"CURAGEN_SEED must be an integer, got '{env_seed}'") from None
    if seed is None:
        raise ConfigError("seed is required (set it in config, --seed, or CURAGEN_SEED)")

    def spec_of(key: str) -> ProviderSpec:
        value = merged[key]
        if isinstance(value, ProviderSpec):
            return value
        if isinstance(value, str):
            return provider_spec_from_string(value, key)
        if isinstance(value, dict):
            return provider_spec_from_dict(value, key)
        raise ConfigError(f"{key} must be a provider spec object or shorthand string")

    config = PipelineConfig(
        corpus=str(corpus),
        seed=int(seed),
        output_dir=str(merged["output_dir"]),
        cluster_provider=spec_of("cluster_provider"),
        score_provider=spec_of("score_provider"),
        k_min=merged["k_min"],
        k_max=merged["k_max"],
        batch_size=merged["batch_size"],
        iterations=merged["iterations"],
        n_init=merged["n_init"],
        silhouette_sample_cap=merged["silhouette_sample_cap"],
        variants=merged["variants"],
        n=merged["n"],
        tune_sample=merged["tune_sample"],
        tune_n_max=merged["tune_n_max"],
        method=merged["method"],
        quota=merged["quota"],
        size=merged["size"],
        per_cluster_random=merged["per_cluster_random"],
        workers=merged["workers"],
        skip_errors=merged["skip_errors"],
        dump_variants=merged["dump_variants"],
    )
    config.validate()
    return config


def load_config_file(path: str | Path) -> dict[str, Any]:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config file {path} must contain a JSON object")
    return raw


# ---------------------------------------------------------------------------
# Artifacts and serialization
# ---------------------------------------------------------------------------

ARTIFACTS = {
    "ingest": "ingest.json",
    "cluster_cache": "embeddings_cluster.jsonl",
    "score_cache": "embeddings_score.jsonl",
    "ksweep": "ksweep.json",
    "assignments": "assignments.jsonl",
    "tune": "tune.json",
    "tune_curve": "tune_curve.csv",
    "scores": "scores.jsonl",
    "exclusions": "exclusions.jsonl",
    "variants": "variants.jsonl",
    "manifest": "manifest.json",
    "selected": "selected.jsonl",
    "summary": "summary.json",
    "state": "state.json",
}


def write_json(path: Path, obj: Any) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def write_jsonl(path: Path, rows: Sequence[dict[str, Any]]) -> None:
    text = "".join(json.dumps(row, sort_keys=True) + "\n" for row in rows)
    path.write_text(text, encoding="utf-8")


def read_json(path: Path, stage_hint: str) -> Any:
    if not path.exists():
        raise ArtifactError(f"missing artifact {path.name}; run the '{stage_hint}' stage first")
    return json.loads(path.read_text(encoding="utf-8"))


def read_jsonl(path: Path, stage_hint: str) -> list[dict[str, Any]]:
    if not path.exists():
        raise ArtifactError(f"missing artifact {path.name}; run the '{stage_hint}' stage first")
    return [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines()]


def file_sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for block in iter(lambda: handle.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


# ---------------------------------------------------------------------------
# Stage context
# ---------------------------------------------------------------------------


class PipelineContext:
    """Shared lazily-built state for one pipeline invocation."""

    def __init__(self, config: PipelineConfig):
        self.config = config
        self.out = Path(config.output_dir)
        self._corpus: Corpus | None = None
        self._corpus_sha: str | None = None
        self._providers: dict[str, EmbeddingProvider] = {}

    def path(self, artifact: str) -> Path:
        return self.out / ARTIFACTS[artifact]

    @property
    def corpus(self) -> Corpus:
        if self._corpus is None:
            self._corpus = load_corpus(self.config.corpus)
        return self._corpus

    @property
    def corpus_sha(self) -> str:
        if self._corpus_sha is None:
            corpus_path = Path(self.config.corpus)
            if not corpus_path.exists():
                raise ArtifactError(f"corpus file not found: {corpus_path}")
            self._corpus_sha = file_sha256(corpus_path)
        return self._corpus_sha

    def provider(self, role: str) -> EmbeddingProvider:
        if role not in self._providers:
            spec = getattr(self.config, f"{role}_provider")
            cache_artifact = "cluster_cache" if role == "cluster" else "score_cache"
            self._providers[role] = build_provider(spec, cache_path=self.path(cache_artifact))
        return self._providers[role]

    def cluster_matrix(self) -> np.ndarray:
        """Cluster-space embeddings of every record's composite text, in record order."""
        provider = self.provider("cluster")
        composites = [composite_text(record) for record in self.corpus.records]
        rows = []
        for start in range(0, len(composites), EMBED_CHUNK):
            chunk = composites[start : start + EMBED_CHUNK]
            rows.append(embed_batch(provider, chunk))
        return np.vstack(rows)


def build_provider(spec: ProviderSpec, *, cache_path: Path | None = None) -> EmbeddingProvider:
    inner: EmbeddingProvider
    if spec.type == "mock":
        inner = MockProvider(dim=spec.dim, seed=spec.seed)
    elif spec.type == "file":
        store = load_precomputed(spec.path)
        inner = FileProvider(store, name=spec.name or "file")
    else:
        inner = RemoteProvider(spec.url, retries=spec.retries)
    if spec.normalize:
        inner = NormalizedProvider(inner)
    if spec.cache and cache_path is not None:
        store = load_precomputed(cache_path) if cache_path.exists() else EmbeddingStore(path=cache_path)
        inner = CachingProvider(inner, store)
    return inner


# ---------------------------------------------------------------------------
# Stages
# ---------------------------------------------------------------------------


def stage_ingest(ctx: PipelineContext) -> dict[str, Any]:
    corpus = ctx.corpus
    write_json(
        ctx.path("ingest"),
        {
            "record_count": len(corpus),
            "source_path": corpus.source_path,
            "corpus_sha256": ctx.corpus_sha,
        },
    )
    return {"records": len(corpus)}


def stage_embed(ctx: PipelineContext) -> dict[str, Any]:
    matrix = ctx.cluster_matrix()
    return {"records": int(matrix.shape[0]), "dim": int(matrix.shape[1])}


def stage_sweep_k(ctx: PipelineContext) -> dict[str, Any]:
    config = ctx.config
    matrix = ctx.cluster_matrix()
    result = cluster_mod.select_k(
        matrix,
        config.k_min,
        min(config.k_max, matrix.shape[0]),
        batch_size=config.batch_size,
        iterations=config.iterations,
        seed=config.seed,
        n_init=config.n_init,
        sample_cap=config.silhouette_sample_cap,
    )
    write_json(ctx.path("ksweep"), result.to_json())
    return {"chosen_p": result.chosen_p}


def stage_cluster(ctx: PipelineContext) -> dict[str, Any]:
    config = ctx.config
    sweep = read_json(ctx.path("ksweep"), "sweep-k")
    chosen_p = int(sweep["chosen_p"])
    matrix = ctx.cluster_matrix()
    # Refitting with the sweep's derived seed reproduces the sweep's model bit for bit.
    model = cluster_mod.minibatch_kmeans(
        matrix,
        chosen_p,
        batch_size=config.batch_size,
        iterations=config.iterations,
        seed=config.seed ^ chosen_p,
        n_init=config.n_init,
    )
    assignment = cluster_mod.assign(model, matrix)
    rows = [
        {
            "record_id": record.id,
            "cluster": int(assignment.labels[i]),
            "distance": float(assignment.distances[i]),
        }
        for i, record in enumerate(ctx.corpus.records)
    ]
    write_jsonl(ctx.path("assignments"), rows)
    return {"chosen_p": chosen_p, "nonempty": model.nonempty_count()}


def stage_tune(ctx: PipelineContext) -> dict[str, Any]:
    config = ctx.config
    if config.n != "auto":
        return {"mode": "fixed", "n": config.n}
    corpus = ctx.corpus
    sample_size = min(config.tune_sample, len(corpus))
    picked = rng_for("tune-sample", config.seed).choice(
        len(corpus), size=sample_size, replace=False
    )
    picked.sort()
    sample = [corpus.records[int(i)] for i in picked]
    aggregate = sweep_perturbation(
        ctx.provider("score"), sample, config.tune_n_max, config.seed
    )
    write_json(ctx.path("tune"), aggregate.to_json())
    ctx.path("tune_curve").write_text(aggregate.curve_csv(), encoding="utf-8")
    return {"mode": "auto", "chosen_n": aggregate.chosen_n, "K": sample_size}


def _resolve_n(ctx: PipelineContext) -> int:
    if ctx.config.n != "auto":
        return int(ctx.config.n)
    tune = read_json(ctx.path("tune"), "tune-n")
    return int(tune["chosen_n"])


def _clusters_from_assignments(ctx: PipelineContext) -> dict[int, list[str]]:
    rows = read_jsonl(ctx.path("assignments"), "cluster")
    clusters: dict[int, list[str]] = {}
    for row in rows:
        clusters.setdefault(int(row["cluster"]), []).append(str(row["record_id"]))
    return clusters


def stage_score(ctx: PipelineContext) -> dict[str, Any]:
    config = ctx.config
    n = _resolve_n(ctx)
    clusters = _clusters_from_assignments(ctx)
    provider = ctx.provider("score")
    perturbation = PerturbationConfig(n=n, variants=config.variants, seed=config.seed)

    score_rows: list[dict[str, Any]] = []
    exclusion_rows: list[dict[str, Any]] = []
    variant_rows: list[dict[str, Any]] = []
    for cluster_index in sorted(clusters):
        records = [ctx.corpus.record_by_id(rid) for rid in clusters[cluster_index]]
        scores, failures = score_cluster(
            provider,
            records,
            perturbation,
            workers=config.workers,
            skip_errors=config.skip_errors,
        )
        for entry in scores:
            score_rows.append(
                {
                    "record_id": entry.record_id,
                    "cluster": cluster_index,
                    "n": entry.n,
                    "score": entry.score,
                    "distances": list(entry.distances),
                    "truncated": entry.truncated,
                }
            )
        for failure in failures:
            exclusion_rows.append(
                {
                    "record_id": failure.record_id,
                    "cluster": cluster_index,
                    "error": failure.error,
                }
            )
        if config.dump_variants:
            for record in records:
                for variant in perturb(record.instruction, perturbation, scope=record.id):
                    variant_rows.append(
                        {
                            "record_id": variant.record_id,
                            "variant_index": variant.variant_index,
                            "deleted_positions": list(variant.deleted_positions),
                            "text": variant.text,
                        }
                    )

    write_jsonl(ctx.path("scores"), score_rows)
    if exclusion_rows:
        write_jsonl(ctx.path("exclusions"), exclusion_rows)
    if config.dump_variants:
        write_jsonl(ctx.path("variants"), variant_rows)
    return {"n": n, "scored": len(score_rows), "excluded": len(exclusion_rows)}


def stage_select(ctx: PipelineContext) -> dict[str, Any]:
    config = ctx.config
    fingerprint = config.fingerprint()
    if config.method == select_mod.METHOD_TOPK:
        rows = read_jsonl(ctx.path("scores"), "score")
        if not rows:
            raise ArtifactError("score table is empty; nothing to select")
        by_cluster: dict[int, list[EntryScore]] = {}
        for row in rows:
            by_cluster.setdefault(int(row["cluster"]), []).append(
                EntryScore(
                    record_id=str(row["record_id"]),
                    n=int(row["n"]),
                    distances=tuple(float(d) for d in row["distances"]),
                    score=float(row["score"]),
                    truncated=bool(row["truncated"]),
                )
            )
        rankings = [
            rank_cluster(entries, cluster_index)
            for cluster_index, entries in sorted(by_cluster.items())
        ]
        manifest = select_mod.select_top(
            rankings, config.quota, seed=config.seed, fingerprint=fingerprint
        )
    elif config.method == select_mod.METHOD_RANDOM:
        if config.per_cluster_random:
            clusters = _clusters_from_assignments(ctx)
            manifest = select_mod.select_random_per_cluster(
                clusters, config.quota, config.seed, fingerprint=fingerprint
            )
        else:
            manifest = select_mod.select_random(
                ctx.corpus, config.size, config.seed, fingerprint=fingerprint
            )
    else:
        matrix = ctx.cluster_matrix()
        manifest = select_mod.select_kcenter(
            list(ctx.corpus.ids()), matrix, config.size, config.seed, fingerprint=fingerprint
        )

    write_json(ctx.path("manifest"), manifest.to_json())
    raw_by_id = {record.id: ctx.corpus.raw_lines[i] for i, record in enumerate(ctx.corpus.records)}
    lines = [raw_by_id[rid] for rid in manifest.selected_ids()]
    ctx.path("selected").write_text(
        "".join(line + "\n" for line in lines), encoding="utf-8"
    )
    return {"method": config.method, "total": manifest.total}


STAGE_FUNCS: dict[str, Callable[[PipelineContext], dict[str, Any]]] = {
    "ingest": stage_ingest,
    "embed": stage_embed,
    "sweep-k": stage_sweep_k,
    "cluster": stage_cluster,
    "tune-n": stage_tune,
    "score": stage_score,
    "select": stage_select,
}

# Per-stage config slices: only these knobs (plus corpus content and parent
# fingerprints) can invalidate a stage under --resume.
_STAGE_CONFIG_KEYS: dict[str, tuple[str, ...]] = {
    "ingest": (),
    "embed": ("cluster_provider",),
    "sweep-k": (
        "cluster_provider",
        "k_min",
        "k_max",
        "batch_size",
        "iterations",
        "n_init",
        "silhouette_sample_cap",
        "seed",
    ),
    "cluster": (
        "cluster_provider",
        "k_min",
        "k_max",
        "batch_size",
        "iterations",
        "n_init",
        "silhouette_sample_cap",
        "seed",
    ),
    "tune-n": ("score_provider", "n", "tune_sample", "tune_n_max", "seed"),
    "score": ("score_provider", "n", "variants", "seed", "skip_errors", "dump_variants"),
    "select": ("method", "quota", "size", "per_cluster_random", "seed"),
}

_STAGE_PARENTS: dict[str, tuple[str, ...]] = {
    "ingest": (),
    "embed": ("ingest",),
    "sweep-k": ("embed",),
    "cluster": ("sweep-k",),
    "tune-n": ("ingest",),
    "score": ("cluster", "tune-n"),
    "select": ("score",),
}

_STAGE_OUTPUTS: dict[str, tuple[str, ...]] = {
    "ingest": ("ingest",),
    "embed": ("cluster_cache",),
    "sweep-k": ("ksweep",),
    "cluster": ("assignments",),
    "tune-n": (),  # tune.json only exists in auto mode; handled dynamically
    "score": ("scores",),
    "select": ("manifest", "selected"),
}


def stage_fingerprints(config: PipelineConfig, corpus_sha: str) -> dict[str, str]:
    """Chained per-stage fingerprints over config slices and parent fingerprints."""
    semantic = config.semantic_json()
    fingerprints: dict[str, str] = {}
    for stage in STAGE_ORDER:
        payload = {
            "stage": stage,
            "corpus": corpus_sha,
            "config": {key: semantic[key] for key in _STAGE_CONFIG_KEYS[stage]},
            "parents": [fingerprints[parent] for parent in _STAGE_PARENTS[stage]],
        }
        canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        fingerprints[stage] = hashlib.sha256(canonical.encode("utf-8")).hexdigest()
    return fingerprints


def _stage_outputs(stage: str, config: PipelineConfig) -> tuple[str, ...]:
    if stage == "tune-n":
        return ("tune", "tune_curve") if config.n == "auto" else ()
    return _STAGE_OUTPUTS[stage]


def _load_state(ctx: PipelineContext) -> dict[str, Any]:
    path = ctx.path("state")
    if path.exists():
        state = json.loads(path.read_text(encoding="utf-8"))
        if isinstance(state, dict) and isinstance(state.get("stages"), dict):
            return state
    return {"stages": {}}


def run_pipeline(
    config: PipelineConfig,
    *,
    stages: Sequence[str] | None = None,
    resume: bool = False,
) -> dict[str, Any]:
    """Run the requested stages (all of them by default), writing artifacts.

    With ``resume``, a stage whose input fingerprint matches the recorded
    state and whose outputs exist is skipped. Returns the summary document.
    """
    requested = tuple(stages) if stages is not None else STAGE_ORDER
    for stage in requested:
        if stage not in STAGE_FUNCS:
            raise ConfigError(f"unknown stage '{stage}'")

    ctx = PipelineContext(config)
    ctx.out.mkdir(parents=True, exist_ok=True)
    state = _load_state(ctx)
    fingerprints = stage_fingerprints(config, ctx.corpus_sha)

    summary_stages: list[dict[str, Any]] = []
    for stage in STAGE_ORDER:
        if stage not in requested:
            continue
        fingerprint = fingerprints[stage]
        outputs = [ctx.path(name) for name in _stage_outputs(stage, config)]
        recorded = state["stages"].get(stage, {})
        if (
            resume
            and recorded.get("fingerprint") == fingerprint
            and all(path.exists() for path in outputs)
        ):
            summary_stages.append({"stage": stage, "skipped": True, "seconds": 0.0})
            continue
        started = time.perf_counter()
        try:
            info = STAGE_FUNCS[stage](ctx)
        except Exception as exc:
            raise StageError(stage, exc) from exc
        elapsed = time.perf_counter() - started
        state["stages"][stage] = {
            "fingerprint": fingerprint,
            "outputs": [path.name for path in outputs],
            "info": info,
        }
        write_json(ctx.path("state"), state)
        summary_stages.append(
            {"stage": stage, "skipped": False, "seconds": round(elapsed, 6), "info": info}
        )

    summary = {
        "config_fingerprint": config.fingerprint(),
        "output_dir": str(ctx.out),
        "stages": summary_stages,
    }
    write_json(ctx.path("summary"), summary)
    return summary


def render_report(output_dir: str | Path) -> str:
    """Human-readable run summary rendered from the JSON artifacts."""
    out = Path(output_dir)
    lines = [f"curagen run report: {out}"]
    summary_path = out / ARTIFACTS["summary"]
    if summary_path.exists():
        summary = json.loads(summary_path.read_text(encoding="utf-8"))
        lines.append(f"config fingerprint: {summary.get('config_fingerprint', '?')}")
        for entry in summary.get("stages", []):
            status = "skipped" if entry.get("skipped") else f"{entry.get('seconds', 0):.2f}s"
            info = entry.get("info", {})
            detail = ", ".join(f"{k}={v}" for k, v in sorted(info.items())) if info else ""
            lines.append(f"  {entry['stage']:<8} {status:>8}  {detail}")
    for artifact, description in (
        ("ksweep", "k sweep"),
        ("tune", "perturbation sweep"),
        ("manifest", "selection manifest"),
    ):
        path = out / ARTIFACTS[artifact]
        if not path.exists():
            continue
        doc = json.loads(path.read_text(encoding="utf-8"))
        if artifact == "ksweep":
            lines.append(f"chosen cluster count p = {doc['chosen_p']}")
            for entry in doc["sweep"]:
                flag = " (sampled)" if entry["sampled"] else ""
                lines.append(
                    f"  k={entry['k']:<3} sse={entry['sse']:.6g} "
                    f"silhouette={entry['silhouette']:.6f}{flag}"
                )
        elif artifact == "tune":
            lines.append(f"chosen perturbation n = {doc['chosen_n']} (K={doc['K']})")
            for level in doc["levels"]:
                lines.append(
                    f"  n={level['n']:<3} S_pool={level['S_pool']:.6f} D={level['D']:.6f}"
                )
        else:
            lines.append(
                f"selection: method={doc['method']} total={doc['total']} seed={doc['seed']}"
            )
            for group in doc["per_cluster"]:
                lines.append(
                    f"  cluster {group['cluster_index']}: "
                    f"{len(group['selected'])} of quota {group['quota']}"
                )
    return "\n".join(lines) + "\n"
