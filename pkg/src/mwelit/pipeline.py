"""End-to-end orchestration: build per-MWE artifacts offline, answer online
paraphrase queries, and evaluate matching accuracy (P@k).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Iterable, Mapping, Protocol, Sequence

import numpy as np

from .clustering import (
    DbscanParams,
    embed_occurrences,
    eps_for_checkpoint,
    fit_clusters,
    select_cluster,
)
from .corpus import CorpusConfig, collect_sentences
from .errors import InvalidInput, MissingArtifact, SpanMismatch
from .generation import filter_near_copies, generate_one_token, generate_two_token, merge_candidates
from .mlm.base import MaskedLanguageBackend, masked_span_seq
from .reranking import MaskStrategy, RerankedSet, rerank
from .store import ParaphraseArtifact


@dataclass(frozen=True)
class PipelineConfig:
    """Every knob that affects artifact bytes; snapshotted into the manifest."""

    max_keep: int = 300
    window_size: int = 3
    dedup_overlap_threshold: int = 4
    eps: float | None = None  # None -> checkpoint preset
    min_pts: int | None = None  # None -> max(3, round(0.03 N))
    one_token_k: int = 10
    two_token_k: int = 10
    beam: int = 5
    head_k: int = 50
    edit_distance_threshold: float = 0.2
    strategy: MaskStrategy = MaskStrategy.ATTENTION
    mask_count: int = 5
    attention_masks: int = 2
    seed: int = 0

    def corpus_config(self) -> CorpusConfig:
        return CorpusConfig(
            max_keep=self.max_keep,
            window_size=self.window_size,
            dedup_overlap_threshold=self.dedup_overlap_threshold,
        )

    def resolved_eps(self, checkpoint: str) -> float:
        return self.eps if self.eps is not None else eps_for_checkpoint(checkpoint)

    def snapshot(self, checkpoint: str, n_records: int) -> dict:
        snap = asdict(self)
        snap["strategy"] = MaskStrategy(self.strategy).value
        snap["eps"] = self.resolved_eps(checkpoint)
        snap["min_pts"] = DbscanParams.for_size(n_records, snap["eps"], self.min_pts).min_pts
        snap["checkpoint"] = checkpoint
        return snap


def build_artifact(
    mwe_surface: str,
    corpus_stream: Iterable[str],
    backend: MaskedLanguageBackend,
    config: PipelineConfig = PipelineConfig(),
    store_dir=None,
    backend_descriptor: dict | None = None,
) -> ParaphraseArtifact:
    """Run collect -> sparsify -> embed -> cluster -> generate -> rerank.

    The outlier cluster never reaches generation; if DBSCAN marks everything
    an outlier, all points fall back to a single cluster.  When ``store_dir``
    is given the artifact is persisted atomically.
    """
    records = collect_sentences(corpus_stream, mwe_surface, config.corpus_config())
    embeddings = embed_occurrences(records, backend)
    params = DbscanParams.for_size(
        len(records), config.resolved_eps(backend.checkpoint), config.min_pts
    )
    model = fit_clusters(embeddings, params)

    candidate_sets = {}
    reranked: dict[int, RerankedSet] = {}
    for cid in sorted(model.centroids):
        members = [records[i] for i in model.members(cid)]
        one = filter_near_copies(
            generate_one_token(members, backend, k=config.one_token_k, head_k=config.head_k),
            mwe_surface,
            config.edit_distance_threshold,
        )
        two = filter_near_copies(
            generate_two_token(
                members, backend, beam=config.beam, k=config.two_token_k, head_k=config.head_k
            ),
            mwe_surface,
            config.edit_distance_threshold,
        )
        cs = merge_candidates(one, two, mwe_surface, cid)
        candidate_sets[cid] = cs
        reranked[cid] = rerank(
            cs,
            members,
            backend,
            strategy=config.strategy,
            n=config.mask_count,
            seed=config.seed,
            attention_masks=config.attention_masks,
        )

    artifact = ParaphraseArtifact(
        mwe_surface=mwe_surface,
        checkpoint=backend.checkpoint,
        records=records,
        embeddings=embeddings,
        model=model,
        candidate_sets=candidate_sets,
        reranked=reranked,
        config=config.snapshot(backend.checkpoint, len(records)),
    )
    if store_dir is not None:
        from .store import save_artifact

        save_artifact(artifact, store_dir, backend_descriptor=backend_descriptor)
    return artifact


def target_embedding(
    sentence: str, span: tuple[int, int], backend: MaskedLanguageBackend
) -> np.ndarray:
    seq, _ = masked_span_seq(backend, sentence, span, 1)
    return backend.mask_hidden_states(seq)[0]


def paraphrase(
    target_sentence: str,
    span: tuple[int, int],
    artifact: ParaphraseArtifact,
    backend: MaskedLanguageBackend,
    top_n: int = 10,
) -> list[str]:
    """Pick the cluster whose centroid is closest to the target's mask
    embedding and return that cluster's top reranked surfaces."""
    start, end = span
    if target_sentence[start:end] != artifact.mwe_surface:
        raise SpanMismatch(
            f"target span {span} holds {target_sentence[start:end]!r}, "
            f"artifact is for {artifact.mwe_surface!r}"
        )
    embedding = target_embedding(target_sentence, span, backend)
    cid = select_cluster(embedding, artifact.model)
    ranked = artifact.reranked.get(cid)
    if ranked is None:
        return []
    return ranked.surfaces(top_n)


@dataclass(frozen=True)
class GoldItem:
    """One evaluation row: a sentence, its MWE span, and the gold paraphrase."""

    sentence: str
    span: tuple[int, int]
    gold: str

    def __post_init__(self):
        start, end = self.span
        if not (0 <= start < end <= len(self.sentence)):
            raise InvalidInput(f"gold span {self.span} out of range")
        if not self.gold.strip():
            raise InvalidInput("gold paraphrase must be non-empty")

    @property
    def mwe_surface(self) -> str:
        return self.sentence[self.span[0] : self.span[1]]


def read_gold_jsonl(lines: Iterable[str]) -> list[GoldItem]:
    items = []
    for line in lines:
        line = line.strip()
        if not line:
            continue
        obj = json.loads(line)
        items.append(GoldItem(sentence=obj["sentence"], span=tuple(obj["span"]), gold=obj["gold"]))
    return items


def _normalize(text: str) -> str:
    return " ".join(text.lower().split())


def eval_patk(
    gold: Sequence[GoldItem],
    artifacts: Mapping[str, ParaphraseArtifact],
    backend: MaskedLanguageBackend,
    ks: Sequence[int] = (1, 5, 10),
) -> dict[int, float]:
    """P@k = fraction of gold items whose paraphrase (lowercased,
    whitespace-normalized, exact) appears in the top-k predictions."""
    if not gold:
        raise InvalidInput("gold list is empty")
    if not ks or any(k < 1 for k in ks):
        raise InvalidInput("ks must be positive")
    missing = sorted({g.mwe_surface for g in gold} - set(artifacts))
    if missing:
        raise MissingArtifact(missing)
    max_k = max(ks)
    hits = {k: 0 for k in ks}
    for item in gold:
        preds = paraphrase(item.sentence, item.span, artifacts[item.mwe_surface], backend, top_n=max_k)
        want = _normalize(item.gold)
        rank = next((i for i, p in enumerate(preds) if _normalize(p) == want), None)
        if rank is not None:
            for k in ks:
                if rank < k:
                    hits[k] += 1
    return {k: hits[k] / len(gold) for k in ks}


class SentenceEncoder(Protocol):
    """Abstract sentence-embedding contract for the top-3 averaging helper."""

    def encode(self, text: str) -> np.ndarray: ...


def ave3_embedding(
    target_sentence: str,
    span: tuple[int, int],
    surfaces: Sequence[str],
    encoder: SentenceEncoder,
) -> np.ndarray:
    """Mean sentence embedding over the span substituted with each surface
    (intended for the top-3 paraphrases; fewer surfaces average what exists)."""
    if not surfaces:
        raise InvalidInput("need at least one paraphrase surface")
    start, end = span
    if not (0 <= start < end <= len(target_sentence)):
        raise InvalidInput(f"span {span} out of range")
    total: np.ndarray | None = None
    for surface in surfaces:
        vec = np.asarray(encoder.encode(target_sentence[:start] + surface + target_sentence[end:]), dtype=np.float64)
        total = vec.copy() if total is None else total + vec
    assert total is not None
    return total / len(surfaces)
