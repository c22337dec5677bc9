from .base import (
    MASK_SURFACE,
    SUBWORD_PREFIX,
    MaskedLanguageBackend,
    TokenSeq,
    TopKDistribution,
    build_span_replaced,
    detokenize,
    is_punctuation,
    masked_span_seq,
    truncate_context,
)
from .client import SidecarClient
from .mock import SyntheticBackend, TableBackend, UNK_SURFACE

__all__ = [
    "MASK_SURFACE",
    "SUBWORD_PREFIX",
    "UNK_SURFACE",
    "MaskedLanguageBackend",
    "TokenSeq",
    "TopKDistribution",
    "SidecarClient",
    "SyntheticBackend",
    "TableBackend",
    "build_span_replaced",
    "detokenize",
    "is_punctuation",
    "masked_span_seq",
    "truncate_context",
]
