"""Deterministic mock backends.

``TableBackend`` is driven entirely by explicit fixture tables so a test can
state its oracle by hand: hidden vectors and attention rows are looked up by
the exact token-surface key, and the output head is a literal weight matrix.

``SyntheticBackend`` is procedural: every word owns a fixed vector (seeded
hash, or a topic basis vector for configured marker words), a mask's hidden
state is the sum of the context word vectors, and the output head is the tied
word-vector matrix.  Sentences that share topic markers therefore embed close
together, which is what lets a small corpus with planted senses form real
clusters.  Both backends are pure functions of their construction arguments.
"""

from __future__ import annotations

import hashlib
import json
import re
from typing import Iterable, Mapping, Sequence

import numpy as np

from ..errors import BackendError, DimensionMismatch, InvalidInput
from .base import (
    MASK_SURFACE,
    SUBWORD_PREFIX,
    MaskedLanguageBackend,
    TokenSeq,
    TopKDistribution,
)

UNK_SURFACE = "[UNK]"

_TOKEN_RE = re.compile(r"\[MASK\]|\[UNK\]|\w+(?:'\w+)*|[^\w\s]")


def _split_words(text: str) -> list[str]:
    return _TOKEN_RE.findall(text)


def _hash_rng(surface: str, seed: int) -> np.random.Generator:
    digest = hashlib.blake2b(f"{seed}\x00{surface}".encode("utf-8"), digest_size=8).digest()
    return np.random.default_rng(int.from_bytes(digest, "little"))


class _LinearHeadBackend(MaskedLanguageBackend):
    """Shared machinery: vocab table, word tokenizer, linear head + softmax."""

    def __init__(
        self,
        vocab: Sequence[str],
        head_weights: np.ndarray,
        head_bias: np.ndarray | None,
        checkpoint: str,
        subword_map: Mapping[str, Sequence[str]] | None,
        max_tokens: int,
    ):
        vocab = list(vocab)
        for special in (UNK_SURFACE, MASK_SURFACE):
            if special not in vocab:
                raise InvalidInput(f"mock vocabulary must contain {special}")
        self.vocab: tuple[str, ...] = tuple(vocab)
        self._id_of = {s: i for i, s in enumerate(self.vocab)}
        if len(self._id_of) != len(self.vocab):
            raise InvalidInput("vocabulary contains duplicates")
        self.vocab_size = len(self.vocab)
        self._weights = np.asarray(head_weights, dtype=np.float64)
        if self._weights.shape[0] != self.vocab_size:
            raise InvalidInput(
                f"head weight rows ({self._weights.shape[0]}) != vocab size ({self.vocab_size})"
            )
        self._bias = None if head_bias is None else np.asarray(head_bias, dtype=np.float64)
        self.hidden_size = int(self._weights.shape[1])
        self.checkpoint = checkpoint
        self.max_tokens = max_tokens
        self.mask_id = self._id_of[MASK_SURFACE]
        self.mask_surface = MASK_SURFACE
        self._subword_map = {k: tuple(v) for k, v in (subword_map or {}).items()}

    # -- tokenization -------------------------------------------------------

    def tokenize(self, text: str) -> TokenSeq:
        if not text or not text.strip():
            raise InvalidInput("cannot tokenize empty text")
        ids: list[int] = []
        surfaces: list[str] = []
        subword: list[bool] = []
        for word in _split_words(text):
            if word not in (MASK_SURFACE, UNK_SURFACE):
                word = word.lower()
            for j, piece in enumerate(self._pieces(word)):
                # out-of-vocabulary pieces keep their surface, only the id
                # degrades to [UNK]; surfaces drive word grouping downstream
                ids.append(self._id_of.get(piece, self._id_of[UNK_SURFACE]))
                surfaces.append(piece)
                subword.append(j > 0)
        return TokenSeq(tuple(ids), tuple(surfaces), tuple(subword))

    def _pieces(self, word: str) -> tuple[str, ...]:
        if word in self._subword_map:
            return self._subword_map[word]
        return (word,)

    def token_seq_for(self, surfaces: Sequence[str]) -> TokenSeq:
        """Sequence from explicit piece surfaces (no re-tokenization)."""
        ids = tuple(self._id_of.get(s, self._id_of[UNK_SURFACE]) for s in surfaces)
        return TokenSeq(ids, tuple(surfaces), tuple(s.startswith(SUBWORD_PREFIX) for s in surfaces))

    def id_of(self, surface: str) -> int:
        try:
            return self._id_of[surface]
        except KeyError:
            raise BackendError(f"surface {surface!r} not in mock vocabulary") from None

    # -- head ---------------------------------------------------------------

    def _logits(self, vector: np.ndarray) -> np.ndarray:
        vector = np.asarray(vector, dtype=np.float64)
        if vector.shape != (self.hidden_size,):
            raise DimensionMismatch(
                f"expected vector of length {self.hidden_size}, got shape {vector.shape}"
            )
        logits = self._weights @ vector
        if self._bias is not None:
            logits = logits + self._bias
        return logits

    def _softmax(self, logits: np.ndarray) -> np.ndarray:
        shifted = logits - logits.max()
        exp = np.exp(shifted)
        return exp / exp.sum()

    def apply_output_head(self, vector: np.ndarray, k: int = 50) -> TopKDistribution:
        if k < 1:
            raise InvalidInput("k must be >= 1")
        probs = self._softmax(self._logits(vector))
        order = sorted(range(self.vocab_size), key=lambda i: (-probs[i], i))[:k]
        entries = tuple((i, self.vocab[i], float(probs[i])) for i in order)
        return TopKDistribution(entries=entries, k=k, full_sum=float(probs.sum()))

    def token_log_probs(
        self, tokens: TokenSeq, mask_positions: Sequence[int], targets: Sequence[int]
    ) -> list[float]:
        if len(mask_positions) != len(targets):
            raise InvalidInput("mask_positions and targets must have equal length")
        for p in mask_positions:
            if tokens.ids[p] != self.mask_id:
                raise InvalidInput(f"position {p} is not a mask")
        hiddens = self.mask_hidden_states(tokens)
        all_masks = tokens.mask_positions(self.mask_id)
        by_position = dict(zip(all_masks, hiddens))
        out = []
        for p, target in zip(mask_positions, targets):
            logits = self._logits(by_position[p])
            lse = logits.max() + np.log(np.exp(logits - logits.max()).sum())
            out.append(float(min(0.0, logits[target] - lse)))
        return out


class SyntheticBackend(_LinearHeadBackend):
    """Bag-of-words mock: hidden(mask) = sum of context word vectors; tied head."""

    def __init__(
        self,
        vocab: Iterable[str],
        d: int = 16,
        markers: Mapping[str, int] | None = None,
        seed: int = 0,
        marker_scale: float = 1.0,
        marker_jitter: float = 0.1,
        noise_scale: float = 0.05,
        checkpoint: str = "mock-synthetic",
        subword_map: Mapping[str, Sequence[str]] | None = None,
        max_tokens: int = 512,
    ):
        self._params = {
            "d": d,
            "markers": dict(markers or {}),
            "seed": seed,
            "marker_scale": marker_scale,
            "marker_jitter": marker_jitter,
            "noise_scale": noise_scale,
        }
        self._seed = seed
        self._markers = dict(markers or {})
        self._d = d
        self._marker_scale = marker_scale
        self._marker_jitter = marker_jitter
        self._noise_scale = noise_scale
        vocab = list(dict.fromkeys(vocab))
        weights = np.stack([self._word_vector_raw(s, d) for s in self._with_specials(vocab)])
        super().__init__(
            self._with_specials(vocab), weights, None, checkpoint, subword_map, max_tokens
        )

    @staticmethod
    def _with_specials(vocab: list[str]) -> list[str]:
        out = [s for s in (MASK_SURFACE, UNK_SURFACE) if s not in vocab]
        return out + vocab

    def _hash_unit(self, surface: str) -> np.ndarray:
        v = _hash_rng(surface, self._seed).standard_normal(self._d)
        return v / np.linalg.norm(v)

    def _word_vector_raw(self, surface: str, d: int) -> np.ndarray:
        if surface in (MASK_SURFACE,):
            return np.zeros(d)
        topic = self._markers.get(surface)
        if topic is not None:
            basis = np.zeros(d)
            basis[topic % d] = self._marker_scale
            v = basis + self._marker_jitter * self._hash_unit(surface)
            return v / np.linalg.norm(v) * self._marker_scale
        return self._noise_scale * self._hash_unit(surface)

    def word_vector(self, surface: str) -> np.ndarray:
        return self._word_vector_raw(surface, self._d)

    def mask_hidden_states(self, tokens: TokenSeq) -> list[np.ndarray]:
        positions = tokens.mask_positions(self.mask_id)
        if not positions:
            raise InvalidInput("sequence contains no mask token")
        bag = np.zeros(self._d)
        for tid, surface in zip(tokens.ids, tokens.surfaces):
            if tid != self.mask_id:
                bag = bag + self.word_vector(surface)
        return [bag.copy() for _ in positions]

    def attention_to_masks(self, tokens: TokenSeq) -> np.ndarray:
        if not tokens.mask_positions(self.mask_id):
            raise InvalidInput("sequence contains no mask token")
        weights = np.zeros(len(tokens))
        for i, (tid, surface) in enumerate(zip(tokens.ids, tokens.surfaces)):
            if tid != self.mask_id:
                weights[i] = float(np.linalg.norm(self.word_vector(surface)))
        return weights

    # -- persistence (lets the CLI re-create the backend used at build time) --

    def to_descriptor(self) -> dict:
        return {
            "kind": "synthetic",
            "checkpoint": self.checkpoint,
            "vocab": list(self.vocab),
            "subwords": {k: list(v) for k, v in self._subword_map.items()},
            "max_tokens": self.max_tokens,
            **self._params,
        }

    @classmethod
    def from_descriptor(cls, desc: Mapping) -> "SyntheticBackend":
        return cls(
            vocab=desc["vocab"],
            d=desc["d"],
            markers={k: int(v) for k, v in desc.get("markers", {}).items()},
            seed=desc.get("seed", 0),
            marker_scale=desc.get("marker_scale", 1.0),
            marker_jitter=desc.get("marker_jitter", 0.1),
            noise_scale=desc.get("noise_scale", 0.05),
            checkpoint=desc.get("checkpoint", "mock-synthetic"),
            subword_map=desc.get("subwords"),
            max_tokens=desc.get("max_tokens", 512),
        )

    @classmethod
    def from_corpus(
        cls,
        lines: Iterable[str],
        markers: Mapping[str, int] | None = None,
        extra_vocab: Iterable[str] = (),
        **kwargs,
    ) -> "SyntheticBackend":
        """Vocabulary = sorted unique word tokens of the corpus (order-independent)."""
        seen: set[str] = set(extra_vocab)
        for line in lines:
            seen.update(_split_words(line.lower()))
        seen.update(markers or {})
        return cls(vocab=sorted(seen), markers=markers, **kwargs)


class TableBackend(_LinearHeadBackend):
    """Fixture-file mock: exact lookup of hidden vectors and attention rows.

    Keys are the space-joined token surfaces of the query sequence, e.g.
    ``"the [MASK] sang"``.  Missing keys raise ``BackendError`` so a test can
    never silently fall through to made-up values.
    """

    def __init__(
        self,
        vocab: Sequence[str],
        head_weights,
        hidden: Mapping[str, Sequence[Sequence[float]]],
        attention: Mapping[str, Sequence[Sequence[float]]] | None = None,
        head_bias=None,
        checkpoint: str = "mock-table",
        subword_map: Mapping[str, Sequence[str]] | None = None,
        max_tokens: int = 512,
    ):
        super().__init__(vocab, np.asarray(head_weights), head_bias, checkpoint, subword_map, max_tokens)
        self._hidden = {k: [np.asarray(v, dtype=np.float64) for v in vs] for k, vs in hidden.items()}
        self._attention = {
            k: [np.asarray(row, dtype=np.float64) for row in rows]
            for k, rows in (attention or {}).items()
        }

    @staticmethod
    def key_for(tokens: TokenSeq) -> str:
        return " ".join(tokens.surfaces)

    def mask_hidden_states(self, tokens: TokenSeq) -> list[np.ndarray]:
        positions = tokens.mask_positions(self.mask_id)
        if not positions:
            raise InvalidInput("sequence contains no mask token")
        key = self.key_for(tokens)
        try:
            vectors = self._hidden[key]
        except KeyError:
            raise BackendError(f"no hidden fixture for key {key!r}") from None
        if len(vectors) < len(positions):
            raise BackendError(f"hidden fixture for {key!r} covers {len(vectors)} masks, need {len(positions)}")
        return [vectors[i].copy() for i in range(len(positions))]

    def attention_to_masks(self, tokens: TokenSeq) -> np.ndarray:
        positions = tokens.mask_positions(self.mask_id)
        if not positions:
            raise InvalidInput("sequence contains no mask token")
        key = self.key_for(tokens)
        try:
            rows = self._attention[key]
        except KeyError:
            raise BackendError(f"no attention fixture for key {key!r}") from None
        for row in rows:
            if len(row) != len(tokens):
                raise BackendError(f"attention fixture row for {key!r} has wrong length")
        return np.mean(np.stack(rows[: len(positions)]), axis=0)

    @classmethod
    def from_json(cls, path) -> "TableBackend":
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
        return cls(
            vocab=obj["vocab"],
            head_weights=obj["head_weights"],
            hidden=obj.get("hidden", {}),
            attention=obj.get("attention"),
            head_bias=obj.get("head_bias"),
            checkpoint=obj.get("checkpoint", "mock-table"),
            subword_map=obj.get("subwords"),
            max_tokens=obj.get("max_tokens", 512),
        )
