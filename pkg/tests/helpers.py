"""Shared test utilities: fixture-table construction and data paths."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from mwelit.corpus import OccurrenceRecord, window_tokens
from mwelit.mlm.base import MASK_SURFACE
from mwelit.mlm.mock import UNK_SURFACE, SyntheticBackend, TableBackend

DATA_DIR = Path(__file__).resolve().parents[1] / "src" / "mwelit" / "data"
MINI_CORPUS = DATA_DIR / "mini_corpus.txt"
MINI_MARKERS = DATA_DIR / "mini_markers.json"
MINI_GOLD = DATA_DIR / "mini_gold.jsonl"
TINY = 1e-20  # probability mass parked on special tokens in hand-built tables


def load_markers(path=MINI_MARKERS) -> dict[str, int]:
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    markers: dict[str, int] = {}
    for topic_index, name in enumerate(sorted(obj["topics"])):
        for word in obj["topics"][name]:
            markers[word] = topic_index
    return markers


def mini_backend(**kwargs) -> SyntheticBackend:
    with open(MINI_CORPUS, encoding="utf-8") as fh:
        return SyntheticBackend.from_corpus(fh, markers=load_markers(), d=16, **kwargs)


def record_for(text: str, mwe: str, record_id: int = 0, window: int = 3) -> OccurrenceRecord:
    """Build a record from a sentence known to contain ``mwe`` literally."""
    start = text.index(mwe)
    span = (start, start + len(mwe))
    return OccurrenceRecord(
        id=record_id,
        text=text,
        mwe_surface=mwe,
        span=span,
        left_window=window_tokens(text[: span[0]], window, nearest_last=True),
        right_window=window_tokens(text[span[1] :], window, nearest_last=False),
    )


def identity_table(
    vocab_words: list[str],
    hidden: dict[str, list[dict[str, float]]],
    attention: dict[str, list[list[float]]] | None = None,
    **kwargs,
) -> TableBackend:
    """TableBackend whose head is the identity matrix over the vocabulary.

    ``hidden`` maps a key to one probability table per mask; each table maps
    token surface -> intended softmax probability.  Hidden vectors are the
    logs of those tables, so applying the head reproduces the probabilities
    (modulo the tiny mass parked on the special tokens).
    """
    vocab = [MASK_SURFACE, UNK_SURFACE] + vocab_words
    index = {s: i for i, s in enumerate(vocab)}
    d = len(vocab)

    def vec(table: dict[str, float]) -> list[float]:
        v = np.full(d, np.log(TINY))
        for surface, prob in table.items():
            v[index[surface]] = np.log(prob)
        return v.tolist()

    hidden_vectors = {key: [vec(t) for t in tables] for key, tables in hidden.items()}
    return TableBackend(
        vocab=vocab,
        head_weights=np.eye(d),
        hidden=hidden_vectors,
        attention=attention,
        **kwargs,
    )


def probs_from_table(table: dict[str, float], n_vocab_words: int) -> dict[str, float]:
    """What the identity-table head actually returns for a probability table.

    Every vocabulary slot not named in the table carries the TINY mass, so the
    softmax renormalizes by the grand total.
    """
    total = sum(table.values()) + TINY * (n_vocab_words + 2 - len(table))
    return {s: p / total for s, p in table.items()}


# -- reranking fixtures ------------------------------------------------------

RERANK_MWE = "swan song"
RERANK_SENTENCES = [
    f"alpha beta {RERANK_MWE} gamma delta epsilon",
    f"zeta eta theta {RERANK_MWE} iota kappa",
]


def words_of(text: str) -> list[str]:
    return [w for w in text.split() if w]


def split_context(sentence: str, mwe: str = RERANK_MWE) -> tuple[list[str], list[str]]:
    left, _, right = sentence.partition(mwe)
    return words_of(left), words_of(right)


def rerank_fixture(sentences, candidates, prob_tables, gen_scores=None):
    """TableBackend + records + Candidate list for reranking oracles.

    ``prob_tables[surface][record_index][i]`` is the probability assigned to
    the i-th masked context word of that record.  Every context word of every
    record is masked (the fixtures keep exactly 5 context words per record and
    the attention strategy with n=5 selects them all), so the reconstruction
    targets are fully pinned down and a test can enumerate the expected mean
    log-probability straight from the tables.
    """
    from mwelit.generation import Candidate

    records = [record_for(s, RERANK_MWE, i) for i, s in enumerate(sentences)]
    vocab = sorted(
        {w for s in sentences for w in words_of(s.replace(RERANK_MWE, ""))}
        | {p for c in candidates for p in c.split()}
        | {"padtok"}
    )
    hidden = {}
    attention = {}
    for sentence in sentences:
        left, right = split_context(sentence)
        frame = left + [MASK_SURFACE, MASK_SURFACE] + right
        attention[" ".join(frame)] = [[1.0] * len(frame)]
    for surface, per_record in prob_tables.items():
        pieces = surface.split()
        for rec_index, probs in enumerate(per_record):
            left, right = split_context(sentences[rec_index])
            masked = [MASK_SURFACE] * len(left) + pieces + [MASK_SURFACE] * len(right)
            targets = left + right
            hidden[" ".join(masked)] = [
                {targets[i]: p, "padtok": max(1.0 - p, 1e-12)} for i, p in enumerate(probs)
            ]
    backend = identity_table(vocab, hidden, attention)
    gen_scores = gen_scores or {c: 0.5 for c in candidates}
    cands = []
    for surface in candidates:
        pieces = tuple(surface.split())
        cands.append(
            Candidate(
                token_ids=tuple(backend.id_of(p) for p in pieces),
                token_surfaces=pieces,
                surface=surface,
                gen_score=gen_scores[surface],
                origin="one_mask" if len(pieces) == 1 else "two_mask_forward",
            )
        )
    return backend, records, cands


def mean_log(per_record) -> float:
    import math

    logs = [math.log(p) for probs in per_record for p in probs]
    return sum(logs) / len(logs)
