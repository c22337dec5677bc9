"""Candidate generation per cluster: averaged mask-filling for 1- and 2-token
paraphrases, then a near-copy filter.

The 1-token route averages the single-mask hidden vectors over all cluster
sentences and applies the output head once.  The 2-token route runs a
two-mask pass to pick the top ``beam`` first tokens, substitutes each one and
re-averages to get the conditional second-token distribution, scores phrases
by the geometric mean sqrt(p_first * p_second_given_first), then repeats the
whole thing with the fill order swapped.  Candidates too close to the MWE in
normalized character edit distance are dropped without backfilling.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import OccurrenceRecord
from .errors import InvalidInput
from .mlm.base import (
    SUBWORD_PREFIX,
    MaskedLanguageBackend,
    TokenSeq,
    build_span_replaced,
    detokenize,
)

ONE_MASK = "one_mask"
TWO_MASK_FORWARD = "two_mask_forward"
TWO_MASK_BACKWARD = "two_mask_backward"


@dataclass(frozen=True)
class Candidate:
    token_ids: tuple[int, ...]
    token_surfaces: tuple[str, ...]
    surface: str
    gen_score: float
    origin: str

    def __post_init__(self):
        if not 0.0 < self.gen_score <= 1.0:
            raise InvalidInput(f"gen_score must be in (0, 1], got {self.gen_score}")
        if not self.surface:
            raise InvalidInput("candidate surface must be non-empty")


@dataclass(frozen=True)
class CandidateSet:
    mwe_surface: str
    cluster_id: int
    candidates: tuple[Candidate, ...]


def _single_token(token_id: int, surface: str) -> TokenSeq:
    return TokenSeq((token_id,), (surface,), (surface.startswith(SUBWORD_PREFIX),))


def averaged_mask_vectors(
    records: Sequence[OccurrenceRecord], backend: MaskedLanguageBackend, block: TokenSeq
) -> list[np.ndarray]:
    """Mean hidden vector per mask of ``block``, summed in record order."""
    if not records:
        raise InvalidInput("need at least one record")
    sums: list[np.ndarray] | None = None
    for record in records:
        seq, _ = build_span_replaced(backend, record.text, record.span, block)
        vectors = backend.mask_hidden_states(seq)
        if sums is None:
            sums = [np.array(v, dtype=np.float64) for v in vectors]
        else:
            for i, v in enumerate(vectors):
                sums[i] += v
    assert sums is not None
    return [s / len(records) for s in sums]


def _top_words(backend: MaskedLanguageBackend, vector, n: int, head_k: int):
    """Top-n vocabulary *words* of the head: control tokens are not words."""
    entries = backend.apply_output_head(vector, k=max(n, head_k)).entries
    words = [e for e in entries if e[1] not in backend.special_surfaces]
    return words[:n]


def generate_one_token(
    records: Sequence[OccurrenceRecord],
    backend: MaskedLanguageBackend,
    k: int = 10,
    head_k: int = 50,
) -> list[Candidate]:
    """Top-k tokens of the head applied to the cluster-averaged mask vector."""
    (avg,) = averaged_mask_vectors(records, backend, backend.mask_token_seq(1))
    return [
        Candidate(
            token_ids=(tid,),
            token_surfaces=(surf,),
            surface=detokenize([surf]),
            gen_score=prob,
            origin=ONE_MASK,
        )
        for tid, surf, prob in _top_words(backend, avg, k, head_k)
    ]


def generate_two_token(
    records: Sequence[OccurrenceRecord],
    backend: MaskedLanguageBackend,
    beam: int = 5,
    k: int = 10,
    head_k: int = 50,
) -> list[Candidate]:
    """Constrained two-mask fill in both orders, joint-scored by sqrt product."""
    first_avg, second_avg = averaged_mask_vectors(records, backend, backend.mask_token_seq(2))

    phrases: list[Candidate] = []
    for y1_id, y1_surf, p1 in _top_words(backend, first_avg, beam, head_k):
        block = _single_token(y1_id, y1_surf).concat(backend.mask_token_seq(1))
        (cond,) = averaged_mask_vectors(records, backend, block)
        for y2_id, y2_surf, p2 in _top_words(backend, cond, beam, head_k):
            phrases.append(_two_token_candidate(y1_id, y1_surf, y2_id, y2_surf, p1, p2, TWO_MASK_FORWARD))
    for y2_id, y2_surf, p2 in _top_words(backend, second_avg, beam, head_k):
        block = backend.mask_token_seq(1).concat(_single_token(y2_id, y2_surf))
        (cond,) = averaged_mask_vectors(records, backend, block)
        for y1_id, y1_surf, p1 in _top_words(backend, cond, beam, head_k):
            phrases.append(_two_token_candidate(y1_id, y1_surf, y2_id, y2_surf, p2, p1, TWO_MASK_BACKWARD))

    best: dict[str, Candidate] = {}
    for cand in phrases:
        prev = best.get(cand.surface)
        if prev is None or cand.gen_score > prev.gen_score:
            best[cand.surface] = cand
    ordered = sorted(best.values(), key=lambda c: (-c.gen_score, c.token_ids, c.surface))
    return ordered[:k]


def _two_token_candidate(
    y1_id: int, y1_surf: str, y2_id: int, y2_surf: str, p_base: float, p_cond: float, origin: str
) -> Candidate:
    surfaces = (y1_surf, y2_surf)
    return Candidate(
        token_ids=(y1_id, y2_id),
        token_surfaces=surfaces,
        surface=detokenize(surfaces),
        gen_score=float(np.sqrt(p_base * p_cond)),
        origin=origin,
    )


def edit_distance(a: str, b: str) -> int:
    """Character-level Levenshtein distance (iterative two-row DP)."""
    if not a:
        return len(b)
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def normalized_edit_distance(a: str, b: str) -> float:
    if not a and not b:
        return 0.0
    return edit_distance(a, b) / max(len(a), len(b))


def filter_near_copies(
    candidates: Sequence[Candidate], mwe_surface: str, threshold: float = 0.2
) -> list[Candidate]:
    """Drop candidates whose lowercased normalized edit distance to the MWE
    is <= threshold (near-copies like pluralized forms of the MWE itself).
    No backfilling: the top-k was selected before this filter."""
    mwe = mwe_surface.lower()
    return [c for c in candidates if normalized_edit_distance(c.surface.lower(), mwe) > threshold]


def merge_candidates(
    one_tok: Sequence[Candidate],
    two_tok: Sequence[Candidate],
    mwe_surface: str,
    cluster_id: int,
) -> CandidateSet:
    """Union of the two filtered lists, deduplicated by surface keeping the
    higher gen_score.  Cross-length ordering is the reranker's job, not ours."""
    merged: list[Candidate] = []
    index: dict[str, int] = {}
    for cand in list(one_tok) + list(two_tok):
        at = index.get(cand.surface)
        if at is None:
            index[cand.surface] = len(merged)
            merged.append(cand)
        elif cand.gen_score > merged[at].gen_score:
            merged[at] = cand
    return CandidateSet(mwe_surface=mwe_surface, cluster_id=cluster_id, candidates=tuple(merged))
