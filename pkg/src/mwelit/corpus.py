"""Streaming corpus scan: collect sentences containing an MWE and sparsify contexts.

The corpus contract is one sentence per line, UTF-8.  Matching is exact on the
surface form (no lemmatisation): inflected variants are distinct MWE types.
"""

from __future__ import annotations

import json
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator

from .errors import EmptyResult, InvalidInput


@dataclass(frozen=True)
class CorpusConfig:
    """Knobs for the collect/sparsify pass."""

    max_keep: int = 300
    window_size: int = 3
    dedup_overlap_threshold: int = 4

    def __post_init__(self):
        if self.max_keep < 1:
            raise InvalidInput("max_keep must be >= 1")
        if self.window_size < 1:
            raise InvalidInput("window_size must be >= 1")


@dataclass(frozen=True)
class OccurrenceRecord:
    """One corpus sentence containing the target MWE.

    ``id`` is the 0-based line number in the corpus stream, so it is stable
    across configurations.  ``span`` is a half-open character range and
    ``text[span[0]:span[1]] == mwe_surface`` always holds.  The windows hold
    up to ``window_size`` lowercased word tokens on each side of the span.
    """

    id: int
    text: str
    mwe_surface: str
    span: tuple[int, int]
    left_window: tuple[str, ...] = field(default=())
    right_window: tuple[str, ...] = field(default=())

    def window_multiset(self) -> Counter:
        return Counter(self.left_window) + Counter(self.right_window)


def _is_letter(ch: str) -> bool:
    return unicodedata.category(ch).startswith("L")


def _strip_punct(token: str) -> str:
    start, end = 0, len(token)
    while start < end and unicodedata.category(token[start]).startswith("P"):
        start += 1
    while end > start and unicodedata.category(token[end - 1]).startswith("P"):
        end -= 1
    return token[start:end]


def window_tokens(text: str, limit: int, *, nearest_last: bool) -> tuple[str, ...]:
    """Lowercased word tokens from ``text``: whitespace split, edge punctuation stripped.

    ``nearest_last=True`` keeps the ``limit`` tokens closest to the end of the
    string (used for the left context); otherwise the ones closest to the start.
    """
    tokens = [t for t in (_strip_punct(tok).lower() for tok in text.split()) if t]
    return tuple(tokens[-limit:] if nearest_last else tokens[:limit])


def find_occurrence(text: str, mwe_surface: str) -> tuple[int, int] | None:
    """First word-boundary-valid occurrence of ``mwe_surface`` in ``text``.

    A boundary is the start/end of the line or a non-letter character, so
    "swan songsmith" does not match "swan song".
    """
    pos = 0
    while True:
        start = text.find(mwe_surface, pos)
        if start < 0:
            return None
        end = start + len(mwe_surface)
        left_ok = start == 0 or not _is_letter(text[start - 1])
        right_ok = end == len(text) or not _is_letter(text[end])
        if left_ok and right_ok:
            return (start, end)
        pos = start + 1


def _make_record(line_no: int, text: str, mwe_surface: str, span: tuple[int, int], window_size: int) -> OccurrenceRecord:
    return OccurrenceRecord(
        id=line_no,
        text=text,
        mwe_surface=mwe_surface,
        span=span,
        left_window=window_tokens(text[: span[0]], window_size, nearest_last=True),
        right_window=window_tokens(text[span[1] :], window_size, nearest_last=False),
    )


def _overlap(a: Counter, b: Counter) -> int:
    return sum((a & b).values())


def collect_sentences(
    corpus_stream: Iterable[str],
    mwe_surface: str,
    config: CorpusConfig = CorpusConfig(),
) -> list[OccurrenceRecord]:
    """Scan a line-oriented corpus for the MWE, sparsifying as it goes.

    Collection and sparsification are a single fused streaming pass: a matching
    sentence is kept only if its combined context-window multiset shares fewer
    than ``dedup_overlap_threshold`` tokens with every previously kept record.
    Scanning stops once ``max_keep`` records survive.  Only the first
    boundary-valid occurrence per sentence produces a record.

    Raises ``EmptyResult`` if no sentence matches at all (even ones later
    discarded by sparsification count as matches).
    """
    if not mwe_surface or " " not in mwe_surface.strip() or mwe_surface.strip() != mwe_surface:
        raise InvalidInput(f"MWE surface must be a multiword string, got {mwe_surface!r}")

    kept: list[OccurrenceRecord] = []
    kept_windows: list[Counter] = []
    matched_any = False
    for line_no, raw in enumerate(corpus_stream):
        text = raw.rstrip("\n")
        span = find_occurrence(text, mwe_surface)
        if span is None:
            continue
        matched_any = True
        record = _make_record(line_no, text, mwe_surface, span, config.window_size)
        window = record.window_multiset()
        if all(_overlap(window, prev) < config.dedup_overlap_threshold for prev in kept_windows):
            kept.append(record)
            kept_windows.append(window)
            if len(kept) >= config.max_keep:
                break
    if not matched_any:
        raise EmptyResult(f"MWE {mwe_surface!r} not found in corpus")
    return kept


def sparsify(records: list[OccurrenceRecord], config: CorpusConfig = CorpusConfig()) -> list[OccurrenceRecord]:
    """Greedy single-pass context dedup, first record wins; preserves input order."""
    kept: list[OccurrenceRecord] = []
    kept_windows: list[Counter] = []
    for record in records:
        window = record.window_multiset()
        if all(_overlap(window, prev) < config.dedup_overlap_threshold for prev in kept_windows):
            kept.append(record)
            kept_windows.append(window)
    return kept


def write_records_jsonl(records: Iterable[OccurrenceRecord], fp: IO[str]) -> None:
    """One record per line: {"id", "text", "span": [start, end], "windows"}."""
    for r in records:
        fp.write(
            json.dumps(
                {
                    "id": r.id,
                    "text": r.text,
                    "span": [r.span[0], r.span[1]],
                    "windows": {"left": list(r.left_window), "right": list(r.right_window)},
                },
                ensure_ascii=False,
                sort_keys=True,
            )
            + "\n"
        )


def read_records_jsonl(lines: Iterable[str]) -> list[OccurrenceRecord]:
    records = []
    for line in lines:
        line = line.strip()
        if not line:
            continue
        obj = json.loads(line)
        start, end = obj["span"]
        records.append(
            OccurrenceRecord(
                id=obj["id"],
                text=obj["text"],
                mwe_surface=obj["text"][start:end],
                span=(start, end),
                left_window=tuple(obj["windows"]["left"]),
                right_window=tuple(obj["windows"]["right"]),
            )
        )
    return records


def iter_corpus_file(path) -> Iterator[str]:
    with open(path, encoding="utf-8") as fh:
        yield from fh
