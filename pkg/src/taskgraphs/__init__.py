"""Evaluate and construct step-dependency graphs for complex tasks.

Data model and JSONL I/O live in core; text normalization and overlap
scores in textnorm; similarity providers in sim; assignment solvers in
assign; step-content and dependency metrics in nodemetrics and
edgemetrics; graph construction in graphops; splitting and baselines in
dataops; the archive converter in tasklama; the CLI in cli.
"""

from .assign import (
    Matching,
    MatchedPair,
    hungarian,
    legacy_scores,
    match_scores,
    relaxed_match,
    sim_matrix,
)
from .core import (
    Dataset,
    PairwiseOrderLabel,
    Step,
    StepSequenceSet,
    TaskGraph,
    ValidationError,
    load_jsonl,
    validate_dag,
)
from .dataops import (
    ClusterAssignment,
    cluster_split,
    load_stopwords,
    repeat_similar_baseline,
    repeat_task_baseline,
)
from .edgemetrics import (
    EdgeMetricsReport,
    EdgeScores,
    PairwiseLabelReport,
    align_nodes,
    all_not_before_labels,
    eval_edges,
    eval_edges_corpus,
    eval_pairwise_corpus,
    eval_pairwise_labels,
)
from .graphops import (
    ScoredSequence,
    ThresholdFit,
    aggregate_sequences,
    build_sf_training_set,
    decycle,
    dedup_merge,
    fit_dedup_threshold,
    labels_to_graph,
    linear_graph,
    select_top_sequences,
    swap_candidates,
)
from .nodemetrics import NodeMetricsReport, eval_corpus, eval_nodes
from .sim import (
    EmbeddingSimilarity,
    EmbeddingStore,
    ExactMatchSimilarity,
    SimilarityProvider,
    TokenSimilarity,
    load_embeddings,
    top_k_similar_tokens,
)
from .tasklama import convert_archive, dataset_stats
from .textnorm import RougeScore, fbeta, normalize_text, rouge_l, rouge_n, tokenize

__version__ = "0.1.0"

__all__ = [
    "ClusterAssignment",
    "Dataset",
    "EdgeMetricsReport",
    "EdgeScores",
    "EmbeddingSimilarity",
    "EmbeddingStore",
    "ExactMatchSimilarity",
    "MatchedPair",
    "Matching",
    "NodeMetricsReport",
    "PairwiseLabelReport",
    "PairwiseOrderLabel",
    "RougeScore",
    "ScoredSequence",
    "SimilarityProvider",
    "Step",
    "StepSequenceSet",
    "TaskGraph",
    "ThresholdFit",
    "TokenSimilarity",
    "ValidationError",
    "aggregate_sequences",
    "align_nodes",
    "all_not_before_labels",
    "build_sf_training_set",
    "cluster_split",
    "convert_archive",
    "dataset_stats",
    "decycle",
    "dedup_merge",
    "eval_corpus",
    "eval_edges",
    "eval_edges_corpus",
    "eval_nodes",
    "eval_pairwise_corpus",
    "eval_pairwise_labels",
    "fbeta",
    "fit_dedup_threshold",
    "hungarian",
    "labels_to_graph",
    "legacy_scores",
    "linear_graph",
    "load_embeddings",
    "load_jsonl",
    "load_stopwords",
    "match_scores",
    "normalize_text",
    "relaxed_match",
    "repeat_similar_baseline",
    "repeat_task_baseline",
    "rouge_l",
    "rouge_n",
    "select_top_sequences",
    "sim_matrix",
    "swap_candidates",
    "tokenize",
    "top_k_similar_tokens",
    "validate_dag",
]
