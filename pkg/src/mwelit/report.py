"""Render artifact and evaluation reports: matplotlib figures to files plus
tab-delimited tables alongside them."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .store import ParaphraseArtifact

_OUTLIER_COLOR = "0.6"


def pca_2d(matrix: np.ndarray) -> np.ndarray:
    """Project rows to the top-2 principal components (SVD on centered data)."""
    centered = matrix - matrix.mean(axis=0, keepdims=True)
    if matrix.shape[1] < 2:
        return np.hstack([centered, np.zeros((matrix.shape[0], 2 - matrix.shape[1]))])
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    return centered @ vt[:2].T


def save_cluster_scatter(artifact: ParaphraseArtifact, path: str | Path) -> Path:
    path = Path(path)
    points = pca_2d(artifact.embeddings)
    labels = artifact.model.labels
    fig, ax = plt.subplots(figsize=(6, 5))
    outliers = labels == -1
    if outliers.any():
        ax.scatter(
            points[outliers, 0], points[outliers, 1], c=_OUTLIER_COLOR, marker="x", label="outliers"
        )
    cmap = plt.get_cmap("tab10")
    for cid in sorted(artifact.model.centroids):
        mask = labels == cid
        ax.scatter(points[mask, 0], points[mask, 1], color=cmap(cid % 10), s=18, label=f"cluster {cid}")
    ax.set_title(f"{artifact.mwe_surface!r}: occurrence embeddings ({artifact.checkpoint})")
    ax.set_xlabel("PC 1")
    ax.set_ylabel("PC 2")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_candidate_chart(artifact: ParaphraseArtifact, cluster_id: int, path: str | Path) -> Path:
    path = Path(path)
    ranked = artifact.reranked[cluster_id]
    entries = list(ranked.entries[:10])
    fig, ax = plt.subplots(figsize=(6, 0.45 * max(4, len(entries))))
    names = [e.candidate.surface for e in entries][::-1]
    scores = [e.rerank_score for e in entries][::-1]
    ax.barh(range(len(entries)), scores, color="steelblue")
    ax.set_yticks(range(len(entries)), names, fontsize=8)
    ax.set_xlabel("rerank score (mean log-probability)")
    ax.set_title(f"{artifact.mwe_surface!r} cluster {cluster_id}: top candidates")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_patk_chart(results: dict[int, float], path: str | Path) -> Path:
    path = Path(path)
    ks = sorted(results)
    fig, ax = plt.subplots(figsize=(4.5, 3.5))
    ax.bar([str(k) for k in ks], [results[k] for k in ks], color="darkseagreen")
    ax.set_ylim(0.0, 1.0)
    ax.set_xlabel("k")
    ax.set_ylabel("P@k")
    ax.set_title("Matching accuracy")
    for i, k in enumerate(ks):
        ax.text(i, results[k] + 0.02, f"{results[k]:.2f}", ha="center", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def write_sentences_tsv(artifact: ParaphraseArtifact, path: str | Path) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(["record_id", "cluster", "text"])
        for record, label in zip(artifact.records, artifact.model.labels):
            writer.writerow([record.id, int(label), record.text])
    return path


def write_candidates_tsv(artifact: ParaphraseArtifact, path: str | Path) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(["cluster", "rank", "surface", "gen_score", "rerank_score", "origin"])
        for cid in sorted(artifact.reranked):
            for rank, entry in enumerate(artifact.reranked[cid].entries, start=1):
                writer.writerow(
                    [
                        cid,
                        rank,
                        entry.candidate.surface,
                        f"{entry.candidate.gen_score:.6g}",
                        f"{entry.rerank_score:.6g}",
                        entry.candidate.origin,
                    ]
                )
    return path


def write_eval_tsv(results: dict[int, float], path: str | Path) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(["k", "precision_at_k"])
        for k in sorted(results):
            writer.writerow([k, f"{results[k]:.6g}"])
    return path


def write_artifact_report(artifact: ParaphraseArtifact, outdir: str | Path) -> list[Path]:
    """Figures plus TSV tables for one artifact; returns the written paths."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = [
        write_sentences_tsv(artifact, outdir / "sentences.tsv"),
        write_candidates_tsv(artifact, outdir / "candidates.tsv"),
        save_cluster_scatter(artifact, outdir / "clusters.png"),
    ]
    for cid in sorted(artifact.reranked):
        if artifact.reranked[cid].entries:
            written.append(save_candidate_chart(artifact, cid, outdir / f"candidates_cluster{cid}.png"))
    return written


def write_eval_report(results: dict[int, float], outdir: str | Path) -> list[Path]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    return [
        write_eval_tsv(results, outdir / "patk.tsv"),
        save_patk_chart(results, outdir / "patk.png"),
    ]
