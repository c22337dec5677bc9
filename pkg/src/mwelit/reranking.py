"""Outer-probability reranking.

Candidates are reranked by how well the model reconstructs masked context
words once the candidate replaces the MWE.  The masked context positions are
planned once per cluster (attention-weighted, random, or a random consecutive
span) and shared by every candidate, so each candidate is judged against the
same reconstruction targets; a candidate's own tokens are never masked.

Context tokens are tokenized and truncated once at planning time and reused
verbatim when assembling candidate-substituted sequences, so planned
positions stay valid for 1- and 2-token candidates alike: positions are kept
in block-independent context coordinates and shifted by the block length at
scoring time.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .corpus import OccurrenceRecord
from .errors import InvalidInput
from .generation import Candidate, CandidateSet
from .mlm.base import (
    SUBWORD_PREFIX,
    MaskedLanguageBackend,
    TokenSeq,
    detokenize,
    is_punctuation,
    truncate_context,
)

#: worst-case span block: two attention masks or a two-token candidate
_BLOCK_RESERVE = 2


class MaskStrategy(str, Enum):
    ATTENTION = "attention"
    RANDOM_WORDS = "random_words"
    RANDOM_SPAN = "random_consecutive_span"
    NONE = "none"


@dataclass(frozen=True)
class _Word:
    """A whole context word: its piece positions in context coordinates."""

    positions: tuple[int, ...]
    head_surface: str
    side: int  # 0 = left of the span block, 1 = right

    @property
    def head(self) -> int:
        return self.positions[0]

    @property
    def eligible(self) -> bool:
        return not is_punctuation(self.head_surface)


@dataclass(frozen=True)
class RecordMaskPlan:
    record_id: int
    left: TokenSeq
    right: TokenSeq
    word_groups: tuple[tuple[int, ...], ...]  # context coordinates (block skipped)
    target_ids: tuple[int, ...]  # flattened, aligned with flattened word_groups

    def context_token(self, pos: int) -> tuple[int, str]:
        if pos < len(self.left):
            return self.left.ids[pos], self.left.surfaces[pos]
        j = pos - len(self.left)
        return self.right.ids[j], self.right.surfaces[j]

    def frame_positions(self, block_len: int) -> tuple[int, ...]:
        cut = len(self.left)
        return tuple(
            p if p < cut else p + block_len for group in self.word_groups for p in group
        )


@dataclass(frozen=True)
class MaskPlan:
    strategy: MaskStrategy
    n: int
    seed: int
    attention_masks: int
    records: tuple[RecordMaskPlan, ...]


@dataclass(frozen=True)
class RankedCandidate:
    candidate: Candidate
    rerank_score: float


@dataclass(frozen=True)
class RerankedSet:
    mwe_surface: str
    cluster_id: int
    strategy: MaskStrategy
    seed: int
    entries: tuple[RankedCandidate, ...]

    def surfaces(self, top_n: int | None = None) -> list[str]:
        picked = self.entries if top_n is None else self.entries[:top_n]
        return [e.candidate.surface for e in picked]


def _context_words(left: TokenSeq, right: TokenSeq) -> list[_Word]:
    words: list[_Word] = []
    for side, offset, seq in ((0, 0, left), (1, len(left), right)):
        positions: list[int] = []
        head = ""
        for i in range(len(seq)):
            if seq.is_subword[i] and positions:
                positions.append(offset + i)
                continue
            if positions:
                words.append(_Word(tuple(positions), head, side))
            positions = [offset + i]
            head = seq.surfaces[i]
        if positions:
            words.append(_Word(tuple(positions), head, side))
    return words


def _record_contexts(
    records: Sequence[OccurrenceRecord], backend: MaskedLanguageBackend
) -> list[tuple[OccurrenceRecord, TokenSeq, TokenSeq]]:
    out = []
    budget = backend.max_tokens - _BLOCK_RESERVE
    for record in records:
        start, end = record.span
        left = backend._tokenize_segment(record.text[:start])
        right = backend._tokenize_segment(record.text[end:])
        left, right = truncate_context(left, right, budget)
        out.append((record, left, right))
    return out


def _attention_selection(
    backend: MaskedLanguageBackend,
    left: TokenSeq,
    right: TokenSeq,
    words: list[_Word],
    n: int,
    attention_masks: int,
) -> list[_Word]:
    frame = left.concat(backend.mask_token_seq(attention_masks)).concat(right)
    weights = backend.attention_to_masks(frame)
    cut = len(left)

    def frame_head(word: _Word) -> int:
        return word.head if word.head < cut else word.head + attention_masks

    eligible = [w for w in words if w.eligible]
    ranked = sorted(eligible, key=lambda w: (-float(weights[frame_head(w)]), w.head))
    return sorted(ranked[:n], key=lambda w: w.head)


def _random_word_selection(words: list[_Word], n: int, rng: random.Random) -> list[_Word]:
    eligible = [w for w in words if w.eligible]
    if len(eligible) <= n:
        return eligible
    picked = rng.sample(range(len(eligible)), n)
    return [eligible[i] for i in sorted(picked)]


def _random_span_selection(words: list[_Word], n: int, rng: random.Random) -> list[_Word]:
    """A run of n consecutive words on one side of the span block."""
    runs: list[list[_Word]] = []
    for side in (0, 1):
        side_words = [w for w in words if w.side == side]
        runs.extend(side_words[s : s + n] for s in range(len(side_words) - n + 1))
    if runs:
        return runs[rng.randrange(len(runs))]
    longest: list[_Word] = []
    for side in (0, 1):
        side_words = [w for w in words if w.side == side]
        if len(side_words) > len(longest):
            longest = side_words
    return longest


def plan_masks(
    records: Sequence[OccurrenceRecord],
    backend: MaskedLanguageBackend,
    strategy: MaskStrategy,
    n: int = 5,
    seed: int = 0,
    attention_masks: int = 2,
) -> MaskPlan:
    """Choose up to ``n`` whole context words to mask, per record.

    Attention: replace the MWE span with ``attention_masks`` mask tokens,
    take last-layer attention from the masks, and pick the top-n eligible
    words (non-punctuation, judged and masked as whole words) by their head
    piece's weight.  Random strategies draw from a per-record RNG derived
    from ``seed`` and the record id.  Fewer than n eligible words means all
    of them are selected.
    """
    strategy = MaskStrategy(strategy)
    planned: list[RecordMaskPlan] = []
    for record, left, right in _record_contexts(records, backend):
        words = _context_words(left, right)
        if strategy is MaskStrategy.NONE:
            selected: list[_Word] = []
        elif strategy is MaskStrategy.ATTENTION:
            selected = _attention_selection(backend, left, right, words, n, attention_masks)
        elif strategy is MaskStrategy.RANDOM_WORDS:
            rng = random.Random(seed * 1_000_003 + record.id)
            selected = _random_word_selection(words, n, rng)
        else:
            rng = random.Random(seed * 1_000_003 + record.id)
            selected = _random_span_selection(words, n, rng)

        groups = tuple(w.positions for w in selected)
        context_ids = left.ids + right.ids
        targets = tuple(context_ids[pos] for group in groups for pos in group)
        planned.append(RecordMaskPlan(record.id, left, right, groups, targets))
    return MaskPlan(strategy=strategy, n=n, seed=seed, attention_masks=attention_masks, records=tuple(planned))


def _candidate_block(candidate: Candidate) -> TokenSeq:
    return TokenSeq(
        candidate.token_ids,
        candidate.token_surfaces,
        tuple(s.startswith(SUBWORD_PREFIX) for s in candidate.token_surfaces),
    )


def outer_score(
    candidate: Candidate,
    records: Sequence[OccurrenceRecord],
    plan: MaskPlan,
    backend: MaskedLanguageBackend,
) -> float:
    """Mean log-probability of reconstructing every planned context token,
    with the candidate substituted for the MWE span in each record.

    The displayed reranking quantity sums the log-probabilities; with one
    shared plan the mean is rank-equivalent and comparable across clusters,
    so the mean is what we return.  With an empty plan the score is 0.0.
    """
    if len(plan.records) != len(records):
        raise InvalidInput("mask plan was built on a different record list")
    block = _candidate_block(candidate)
    log_probs: list[float] = []
    for entry in plan.records:
        positions = entry.frame_positions(len(block))
        if not positions:
            continue
        frame = entry.left.concat(block).concat(entry.right)
        masked = frame.replaced(positions, backend.mask_id, backend.mask_surface)
        log_probs.extend(backend.token_log_probs(masked, positions, entry.target_ids))
    if not log_probs:
        return 0.0
    return sum(log_probs) / len(log_probs)


def repair_duplicate_tokens(candidate: Candidate) -> Candidate:
    """Collapse a 2-token candidate whose tokens are identical ("clock clock")."""
    if len(candidate.token_ids) == 2 and candidate.token_surfaces[0] == candidate.token_surfaces[1]:
        return Candidate(
            token_ids=candidate.token_ids[:1],
            token_surfaces=candidate.token_surfaces[:1],
            surface=detokenize(candidate.token_surfaces[:1]),
            gen_score=candidate.gen_score,
            origin=candidate.origin,
        )
    return candidate


def rerank(
    candidate_set: CandidateSet,
    records: Sequence[OccurrenceRecord],
    backend: MaskedLanguageBackend,
    strategy: MaskStrategy = MaskStrategy.ATTENTION,
    n: int = 5,
    seed: int = 0,
    attention_masks: int = 2,
) -> RerankedSet:
    """Repair duplicated tokens, then order candidates by outer probability.

    One mask plan is computed for the cluster and shared by all candidates.
    Under ``MaskStrategy.NONE`` the ordering falls back to the generation
    probabilities themselves (rerank_score = log gen_score).  Ties break by
    gen_score, then surface.
    """
    strategy = MaskStrategy(strategy)
    repaired: list[Candidate] = []
    index: dict[str, int] = {}
    for cand in candidate_set.candidates:
        cand = repair_duplicate_tokens(cand)
        at = index.get(cand.surface)
        if at is None:
            index[cand.surface] = len(repaired)
            repaired.append(cand)
        elif cand.gen_score > repaired[at].gen_score:
            repaired[at] = cand

    if strategy is MaskStrategy.NONE:
        scored = [RankedCandidate(c, math.log(c.gen_score)) for c in repaired]
    else:
        plan = plan_masks(records, backend, strategy, n=n, seed=seed, attention_masks=attention_masks)
        scored = [RankedCandidate(c, outer_score(c, records, plan, backend)) for c in repaired]

    ordered = sorted(
        scored, key=lambda rc: (-rc.rerank_score, -rc.candidate.gen_score, rc.candidate.surface)
    )
    return RerankedSet(
        mwe_surface=candidate_set.mwe_surface,
        cluster_id=candidate_set.cluster_id,
        strategy=strategy,
        seed=seed,
        entries=tuple(ordered),
    )
