"""curagen: embedding-space curation of instruction-tuning corpora.

Records are clustered in a semantic embedding space, scored by how far
their embeddings translate under seeded word-deletion perturbations, and
selected per cluster by descending generalization score, with random and
k-center-greedy baselines alongside.
"""
from .corpus import Corpus, CorpusError, InstructionRecord, composite_text, load_corpus
from .embed import (
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
    store_key,
)
from .perturb import PerturbationConfig, PerturbedVariant, perturb, tokenize_words
from .cluster import (
    ClusterAssignment,
    ClusterError,
    KMeansModel,
    KSweepResult,
    assign,
    minibatch_kmeans,
    select_k,
    silhouette,
    sse,
)
from .score import (
    ClusterRanking,
    EntryScore,
    euclidean,
    rank_cluster,
    score_cluster,
    score_entry,
)
from .tune import SweepAggregate, choose_n, sweep_perturbation
from .select import (
    SelectionManifest,
    select_kcenter,
    select_random,
    select_top,
)
from .pipeline import PipelineConfig, config_from_dict, run_pipeline

__version__ = "0.1.0"
