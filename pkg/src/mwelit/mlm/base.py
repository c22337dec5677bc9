"""Narrow contract over a masked language model.

The pipeline needs exactly five capabilities: tokenization, hidden states at
mask positions (the vector fed to the token-prediction head), applying that
head to an arbitrary caller-supplied vector, masked-token log-probabilities,
and last-layer attention from masks to every position.  Cross-sentence
averaging of mask embeddings happens in the caller, never in the backend;
that is what keeps the contract single-sentence and a remote sidecar viable.

Continuation subword pieces carry a leading ``##`` in their surface (WordPiece
convention); detokenization joins pieces on that convention.
"""

from __future__ import annotations

import unicodedata
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import InvalidInput

MASK_SURFACE = "[MASK]"
SUBWORD_PREFIX = "##"


@dataclass(frozen=True)
class TokenSeq:
    """Parallel token ids / surfaces / continuation-piece flags."""

    ids: tuple[int, ...]
    surfaces: tuple[str, ...]
    is_subword: tuple[bool, ...]

    def __post_init__(self):
        if not (len(self.ids) == len(self.surfaces) == len(self.is_subword)):
            raise InvalidInput("TokenSeq fields must have equal length")

    def __len__(self) -> int:
        return len(self.ids)

    def mask_positions(self, mask_id: int) -> tuple[int, ...]:
        return tuple(i for i, t in enumerate(self.ids) if t == mask_id)

    def concat(self, other: "TokenSeq") -> "TokenSeq":
        return TokenSeq(
            self.ids + other.ids,
            self.surfaces + other.surfaces,
            self.is_subword + other.is_subword,
        )

    def slice(self, start: int, stop: int) -> "TokenSeq":
        return TokenSeq(self.ids[start:stop], self.surfaces[start:stop], self.is_subword[start:stop])

    def replaced(self, positions: Sequence[int], token_id: int, surface: str) -> "TokenSeq":
        """Copy with the given positions swapped for one token (used for masking)."""
        ids = list(self.ids)
        surfaces = list(self.surfaces)
        subword = list(self.is_subword)
        for p in positions:
            ids[p] = token_id
            surfaces[p] = surface
            subword[p] = False
        return TokenSeq(tuple(ids), tuple(surfaces), tuple(subword))


EMPTY_SEQ = TokenSeq((), (), ())


@dataclass(frozen=True)
class TopKDistribution:
    """Top-k slice of the output-head softmax.

    Entries are (token id, surface, probability), descending by probability
    with ties broken by ascending token id.  ``full_sum`` is the backend's
    reported softmax mass over the whole vocabulary (1 within 1e-4).
    """

    entries: tuple[tuple[int, str, float], ...]
    k: int
    full_sum: float = 1.0


def detokenize(surfaces: Sequence[str]) -> str:
    """Join pieces into a string: continuation pieces attach without a space."""
    out: list[str] = []
    for s in surfaces:
        if s.startswith(SUBWORD_PREFIX) and out:
            out[-1] += s[len(SUBWORD_PREFIX) :]
        else:
            out.append(s[len(SUBWORD_PREFIX) :] if s.startswith(SUBWORD_PREFIX) else s)
    return " ".join(out)


def is_punctuation(surface: str) -> bool:
    """True when every character is in a Unicode punctuation/symbol category."""
    stripped = surface[len(SUBWORD_PREFIX) :] if surface.startswith(SUBWORD_PREFIX) else surface
    if not stripped:
        return False
    return all(unicodedata.category(ch)[0] in ("P", "S") for ch in stripped)


class MaskedLanguageBackend(ABC):
    """Thread-safe, stateless view of a pretrained MLM."""

    #: reported hidden size d
    hidden_size: int
    #: vocabulary size
    vocab_size: int
    #: checkpoint name (keys the DBSCAN eps presets)
    checkpoint: str
    #: inclusive cap on sequence length fed to the model
    max_tokens: int = 512
    mask_id: int
    mask_surface: str = MASK_SURFACE
    #: surfaces that are control tokens, never paraphrase words
    special_surfaces: frozenset[str] = frozenset(
        {MASK_SURFACE, "[UNK]", "[CLS]", "[SEP]", "[PAD]"}
    )

    @abstractmethod
    def tokenize(self, text: str) -> TokenSeq:
        """Tokenize non-empty text; continuation pieces are flagged is_subword."""

    @abstractmethod
    def mask_hidden_states(self, tokens: TokenSeq) -> list[np.ndarray]:
        """Hidden vector fed to the output head, one per mask, in position order."""

    @abstractmethod
    def apply_output_head(self, vector: np.ndarray, k: int = 50) -> TopKDistribution:
        """Top-k of softmax(head(vector)); accepts caller-averaged vectors."""

    @abstractmethod
    def token_log_probs(
        self, tokens: TokenSeq, mask_positions: Sequence[int], targets: Sequence[int]
    ) -> list[float]:
        """log P(target at position | masked input), one forward pass, <= 0."""

    @abstractmethod
    def attention_to_masks(self, tokens: TokenSeq) -> np.ndarray:
        """Last-layer attention from the mask(s) to each position, averaged over
        heads and mask query positions.  Values at mask positions are ignored
        by callers."""

    # -- shared helpers -----------------------------------------------------

    def mask_token_seq(self, n: int = 1) -> TokenSeq:
        return TokenSeq((self.mask_id,) * n, (self.mask_surface,) * n, (False,) * n)

    def _tokenize_segment(self, text: str) -> TokenSeq:
        """Tokenize a (possibly empty) context fragment."""
        if not text.strip():
            return EMPTY_SEQ
        return self.tokenize(text)


def build_span_replaced(
    backend: MaskedLanguageBackend,
    text: str,
    span: tuple[int, int],
    block: TokenSeq,
) -> tuple[TokenSeq, int]:
    """Tokenize ``text`` with ``text[span]`` replaced by ``block``.

    Returns the sequence and the index where the block starts.  Sequences
    longer than the backend limit are truncated symmetrically around the
    block; the shorter side donates its unused budget to the other.
    """
    start, end = span
    if not (0 <= start < end <= len(text)):
        raise InvalidInput(f"span {span} out of range for text of length {len(text)}")
    left = backend._tokenize_segment(text[:start])
    right = backend._tokenize_segment(text[end:])
    left, right = truncate_context(left, right, backend.max_tokens - len(block))
    return left.concat(block).concat(right), len(left)


def truncate_context(left: TokenSeq, right: TokenSeq, budget: int) -> tuple[TokenSeq, TokenSeq]:
    """Trim context symmetrically: keep the tokens nearest the replaced span."""
    if len(left) + len(right) <= budget:
        return left, right
    if budget <= 0:
        return EMPTY_SEQ, EMPTY_SEQ
    half = budget // 2
    if len(left) <= half:
        n_left = len(left)
    elif len(right) <= budget - half:
        n_left = budget - len(right)
    else:
        n_left = half
    n_right = budget - n_left
    return left.slice(len(left) - n_left, len(left)), right.slice(0, n_right)


def masked_span_seq(
    backend: MaskedLanguageBackend, text: str, span: tuple[int, int], n_masks: int
) -> tuple[TokenSeq, int]:
    """Sequence with the span replaced by ``n_masks`` mask tokens."""
    return build_span_replaced(backend, text, span, backend.mask_token_seq(n_masks))
