"""Persisted per-MWE artifact: everything needed to answer online paraphrase
queries without touching the corpus again.

Layout: one directory per MWE surface (slug + surface hash) containing
sentences.jsonl, embeddings.bin, clusters.json, candidates.json,
reranked.json and manifest.json.  embeddings.bin is an 8-byte header
(u32 N, u32 d, little-endian) followed by row-major float32 data, so a
reloaded matrix is bit-exact.  Writes go to a temp directory that is renamed
into place, so a failed build never leaves a half-written store.
"""

from __future__ import annotations

import hashlib
import io
import json
import os
import shutil
import struct
import uuid
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np

from .clustering import ClusterModel, DbscanParams
from .corpus import OccurrenceRecord, read_records_jsonl, write_records_jsonl
from .errors import InvalidInput
from .generation import Candidate, CandidateSet
from .reranking import MaskStrategy, RankedCandidate, RerankedSet

ARTIFACT_FORMAT = 1


@dataclass
class ParaphraseArtifact:
    """Self-contained bundle for one MWE surface form."""

    mwe_surface: str
    checkpoint: str
    records: list[OccurrenceRecord]
    embeddings: np.ndarray
    model: ClusterModel
    candidate_sets: dict[int, CandidateSet]
    reranked: dict[int, RerankedSet]
    config: dict
    content_hash: str = ""

    def __post_init__(self):
        if not self.content_hash:
            self.content_hash = content_hash(self)

    @property
    def strategy(self) -> str:
        sets = list(self.reranked.values())
        return sets[0].strategy.value if sets else MaskStrategy.NONE.value

    @property
    def seed(self) -> int:
        sets = list(self.reranked.values())
        return sets[0].seed if sets else 0


def slug_for(mwe_surface: str) -> str:
    safe = "".join(ch if ch.isalnum() else "_" for ch in mwe_surface.lower()).strip("_") or "mwe"
    digest = hashlib.sha256(mwe_surface.encode("utf-8")).hexdigest()[:8]
    return f"{safe}-{digest}"


def _canonical_json(obj) -> bytes:
    return (json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":")) + "\n").encode(
        "utf-8"
    )


def _sentences_bytes(records) -> bytes:
    buf = io.StringIO()
    write_records_jsonl(records, buf)
    return buf.getvalue().encode("utf-8")


def _embeddings_bytes(matrix: np.ndarray) -> bytes:
    m = np.ascontiguousarray(matrix, dtype="<f4")
    n, d = m.shape
    return struct.pack("<II", n, d) + m.tobytes()


def _embeddings_from_bytes(data: bytes) -> np.ndarray:
    n, d = struct.unpack("<II", data[:8])
    return np.frombuffer(data[8:], dtype="<f4").reshape(n, d).astype(np.float64)


def _clusters_obj(artifact: ParaphraseArtifact) -> dict:
    model = artifact.model
    return {
        "labels": [int(x) for x in model.labels],
        "centroids": {str(cid): [float(x) for x in vec] for cid, vec in model.centroids.items()},
        "params": {"eps": model.params.eps, "min_pts": model.params.min_pts},
        "checkpoint": artifact.checkpoint,
        "n": int(artifact.embeddings.shape[0]),
        "d": int(artifact.embeddings.shape[1]),
    }


def _candidate_dict(c: Candidate) -> dict:
    return {
        "surface": c.surface,
        "token_ids": list(c.token_ids),
        "token_surfaces": list(c.token_surfaces),
        "gen_score": c.gen_score,
        "origin": c.origin,
    }


def _candidate_from_dict(obj: dict) -> Candidate:
    return Candidate(
        token_ids=tuple(obj["token_ids"]),
        token_surfaces=tuple(obj["token_surfaces"]),
        surface=obj["surface"],
        gen_score=obj["gen_score"],
        origin=obj["origin"],
    )


def _candidates_obj(artifact: ParaphraseArtifact) -> dict:
    return {
        "clusters": {
            str(cid): [_candidate_dict(c) for c in cs.candidates]
            for cid, cs in sorted(artifact.candidate_sets.items())
        }
    }


def _reranked_obj(artifact: ParaphraseArtifact) -> dict:
    return {
        "strategy": artifact.strategy,
        "seed": artifact.seed,
        "clusters": {
            str(cid): [
                {**_candidate_dict(e.candidate), "rerank_score": e.rerank_score}
                for e in rs.entries
            ]
            for cid, rs in sorted(artifact.reranked.items())
        },
    }


def _data_files(artifact: ParaphraseArtifact) -> dict[str, bytes]:
    return {
        "sentences.jsonl": _sentences_bytes(artifact.records),
        "embeddings.bin": _embeddings_bytes(artifact.embeddings),
        "clusters.json": _canonical_json(_clusters_obj(artifact)),
        "candidates.json": _canonical_json(_candidates_obj(artifact)),
        "reranked.json": _canonical_json(_reranked_obj(artifact)),
    }


def content_hash(artifact: ParaphraseArtifact) -> str:
    """sha256 over every determinism-relevant byte of the artifact."""
    h = hashlib.sha256()
    for name, data in sorted(_data_files(artifact).items()):
        h.update(name.encode("utf-8") + b"\x00")
        h.update(data)
    h.update(b"config\x00")
    h.update(_canonical_json(artifact.config))
    return h.hexdigest()


def save_artifact(
    artifact: ParaphraseArtifact, store_dir: str | Path, backend_descriptor: dict | None = None
) -> Path:
    """Write the artifact bundle atomically; returns the artifact directory."""
    store = Path(store_dir)
    store.mkdir(parents=True, exist_ok=True)
    target = store / slug_for(artifact.mwe_surface)
    tmp = store / f".tmp-{uuid.uuid4().hex}"
    tmp.mkdir()
    try:
        files = _data_files(artifact)
        for name, data in files.items():
            (tmp / name).write_bytes(data)
        manifest = {
            "format": ARTIFACT_FORMAT,
            "mwe": artifact.mwe_surface,
            "checkpoint": artifact.checkpoint,
            "config": artifact.config,
            "content_hash": artifact.content_hash,
            "files": sorted(files),
        }
        (tmp / "manifest.json").write_bytes(_canonical_json(manifest))
        if backend_descriptor is not None:
            (tmp / "backend.json").write_bytes(_canonical_json(backend_descriptor))
        if target.exists():
            shutil.rmtree(target)
        os.rename(tmp, target)
    except Exception:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    return target


def artifact_path(store_dir: str | Path, mwe_surface: str) -> Path:
    return Path(store_dir) / slug_for(mwe_surface)


def load_artifact(store_dir: str | Path, mwe_surface: str) -> ParaphraseArtifact:
    path = artifact_path(store_dir, mwe_surface)
    if not path.is_dir():
        raise InvalidInput(f"no artifact for {mwe_surface!r} under {store_dir}")
    manifest = json.loads((path / "manifest.json").read_text(encoding="utf-8"))
    records = read_records_jsonl((path / "sentences.jsonl").read_text(encoding="utf-8").splitlines())
    embeddings = _embeddings_from_bytes((path / "embeddings.bin").read_bytes())
    clusters = json.loads((path / "clusters.json").read_text(encoding="utf-8"))
    model = ClusterModel(
        labels=np.array(clusters["labels"], dtype=np.int64),
        centroids={int(cid): np.array(vec) for cid, vec in clusters["centroids"].items()},
        params=DbscanParams(eps=clusters["params"]["eps"], min_pts=clusters["params"]["min_pts"]),
    )
    cands = json.loads((path / "candidates.json").read_text(encoding="utf-8"))
    candidate_sets = {
        int(cid): CandidateSet(
            mwe_surface=manifest["mwe"],
            cluster_id=int(cid),
            candidates=tuple(_candidate_from_dict(c) for c in lst),
        )
        for cid, lst in cands["clusters"].items()
    }
    rr = json.loads((path / "reranked.json").read_text(encoding="utf-8"))
    reranked = {
        int(cid): RerankedSet(
            mwe_surface=manifest["mwe"],
            cluster_id=int(cid),
            strategy=MaskStrategy(rr["strategy"]),
            seed=rr["seed"],
            entries=tuple(
                RankedCandidate(_candidate_from_dict(e), e["rerank_score"]) for e in lst
            ),
        )
        for cid, lst in rr["clusters"].items()
    }
    return ParaphraseArtifact(
        mwe_surface=manifest["mwe"],
        checkpoint=manifest["checkpoint"],
        records=records,
        embeddings=embeddings,
        model=model,
        candidate_sets=candidate_sets,
        reranked=reranked,
        config=manifest["config"],
        content_hash=manifest["content_hash"],
    )


def load_backend_descriptor(store_dir: str | Path, mwe_surface: str) -> dict | None:
    path = artifact_path(store_dir, mwe_surface) / "backend.json"
    if not path.exists():
        return None
    return json.loads(path.read_text(encoding="utf-8"))


def iter_artifact_mwes(store_dir: str | Path) -> Iterator[str]:
    store = Path(store_dir)
    if not store.is_dir():
        return
    for child in sorted(store.iterdir()):
        manifest = child / "manifest.json"
        if manifest.is_file():
            yield json.loads(manifest.read_text(encoding="utf-8"))["mwe"]
