"""mwelit: paraphrase multiword expressions into literal 1-2 token substitutes.

Unsupervised five-stage pipeline over a monolingual corpus and an
off-the-shelf masked language model: collect occurrences, cluster mask
embeddings into senses, generate candidates by averaged mask-filling, rerank
by outer probability, and answer online queries from precomputed artifacts.
"""

__version__ = "0.1.0"

from .clustering import (
    ClusterModel,
    DbscanParams,
    dbscan_cosine,
    default_min_pts,
    embed_occurrences,
    eps_for_checkpoint,
    fit_clusters,
    select_cluster,
)
from .corpus import CorpusConfig, OccurrenceRecord, collect_sentences, sparsify
from .errors import (
    BackendError,
    DegenerateInput,
    DimensionMismatch,
    EmptyResult,
    InvalidInput,
    MissingArtifact,
    MwelitError,
    NoClusters,
    SpanMismatch,
)
from .generation import (
    Candidate,
    CandidateSet,
    filter_near_copies,
    generate_one_token,
    generate_two_token,
    merge_candidates,
    normalized_edit_distance,
)
from .mlm import MaskedLanguageBackend, SidecarClient, SyntheticBackend, TableBackend, TokenSeq
from .pipeline import (
    GoldItem,
    PipelineConfig,
    ave3_embedding,
    build_artifact,
    eval_patk,
    paraphrase,
)
from .reranking import MaskPlan, MaskStrategy, RerankedSet, outer_score, plan_masks, rerank, repair_duplicate_tokens
from .store import ParaphraseArtifact, load_artifact, save_artifact

__all__ = [
    "__version__",
    "BackendError",
    "Candidate",
    "CandidateSet",
    "ClusterModel",
    "CorpusConfig",
    "DbscanParams",
    "DegenerateInput",
    "DimensionMismatch",
    "EmptyResult",
    "GoldItem",
    "InvalidInput",
    "MaskPlan",
    "MaskStrategy",
    "MaskedLanguageBackend",
    "MissingArtifact",
    "MwelitError",
    "NoClusters",
    "OccurrenceRecord",
    "ParaphraseArtifact",
    "PipelineConfig",
    "RerankedSet",
    "SidecarClient",
    "SpanMismatch",
    "SyntheticBackend",
    "TableBackend",
    "TokenSeq",
    "ave3_embedding",
    "build_artifact",
    "collect_sentences",
    "dbscan_cosine",
    "default_min_pts",
    "embed_occurrences",
    "eps_for_checkpoint",
    "eval_patk",
    "filter_near_copies",
    "fit_clusters",
    "generate_one_token",
    "generate_two_token",
    "load_artifact",
    "merge_candidates",
    "normalized_edit_distance",
    "outer_score",
    "paraphrase",
    "plan_masks",
    "rerank",
    "repair_duplicate_tokens",
    "save_artifact",
    "select_cluster",
    "sparsify",
]
