"""Cosine DBSCAN over occurrence mask-embeddings, centroids, cluster selection.

DBSCAN is implemented here rather than delegated so that the border-point
rule is pinned down: points are processed in row order, clusters are created
at the first unvisited core point, and a border point reachable from several
clusters keeps the label of the first cluster that claims it.  Cluster ids
are 0..C-1 in discovery order; label -1 marks outliers.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .corpus import OccurrenceRecord
from .errors import BackendError, DegenerateInput, InvalidInput, NoClusters
from .mlm.base import MaskedLanguageBackend, masked_span_seq

#: eps per checkpoint, tuned values shipped as overridable defaults
EPS_PRESETS: dict[str, float] = {
    "bert-base-uncased": 0.4,
    "bert-large-uncased-whole-word-masking": 0.5,
    "spanbert-large-cased": 0.3,
    "albert-large-v2": 0.3,
    "neuralmind/bert-base-portuguese-cased": 0.3,
    "neuralmind/bert-large-portuguese-cased": 0.3,
    "dvilares/bertinho-gl-base-cased": 0.3,
}

DEFAULT_EPS = 0.4


def eps_for_checkpoint(checkpoint: str) -> float:
    return EPS_PRESETS.get(checkpoint, DEFAULT_EPS)


def default_min_pts(n: int) -> int:
    """max(3, round(0.03 N)), rounding half away from zero."""
    return max(3, int(math.floor(0.03 * n + 0.5)))


@dataclass(frozen=True)
class DbscanParams:
    eps: float
    min_pts: int

    def __post_init__(self):
        if not (0.0 < self.eps <= 2.0):
            raise InvalidInput(f"eps must be in (0, 2], got {self.eps}")
        if self.min_pts < 1:
            raise InvalidInput(f"min_pts must be >= 1, got {self.min_pts}")

    @classmethod
    def for_size(cls, n: int, eps: float, min_pts: int | None = None) -> "DbscanParams":
        return cls(eps=eps, min_pts=default_min_pts(n) if min_pts is None else min_pts)


@dataclass
class ClusterModel:
    labels: np.ndarray
    centroids: dict[int, np.ndarray]
    params: DbscanParams

    @property
    def n_clusters(self) -> int:
        return len(self.centroids)

    def members(self, cluster_id: int) -> np.ndarray:
        return np.flatnonzero(self.labels == cluster_id)


def embed_occurrences(
    records: list[OccurrenceRecord], backend: MaskedLanguageBackend
) -> np.ndarray:
    """Row i = hidden state of a single mask replacing record i's MWE span."""
    rows = []
    for record in records:
        try:
            seq, _ = masked_span_seq(backend, record.text, record.span, 1)
            rows.append(backend.mask_hidden_states(seq)[0])
        except BackendError as exc:
            raise BackendError(str(exc), record_id=record.id) from exc
    if not rows:
        raise InvalidInput("cannot embed an empty record list")
    return np.stack(rows)


def _cosine_distances(matrix: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=1)
    if np.any(norms == 0.0):
        raise DegenerateInput("embedding rows with zero norm have no cosine distance")
    unit = matrix / norms[:, None]
    dist = 1.0 - unit @ unit.T
    return np.clip(dist, 0.0, 2.0)


def dbscan_cosine(matrix: np.ndarray, params: DbscanParams) -> ClusterModel:
    """Deterministic DBSCAN with distance(u, v) = 1 - cos(u, v)."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] < 1:
        raise InvalidInput("embedding matrix must be N x d with N >= 1")
    n = matrix.shape[0]
    dist = _cosine_distances(matrix)
    neighbors = [np.flatnonzero(dist[i] <= params.eps) for i in range(n)]
    core = np.array([len(nb) >= params.min_pts for nb in neighbors])

    labels = np.full(n, -1, dtype=np.int64)
    cluster_id = 0
    for i in range(n):
        if not core[i] or labels[i] != -1:
            continue
        labels[i] = cluster_id
        queue = deque([i])
        while queue:
            q = queue.popleft()
            for nb in neighbors[q]:
                if labels[nb] == -1:
                    labels[nb] = cluster_id
                    if core[nb]:
                        queue.append(nb)
        cluster_id += 1
    return ClusterModel(labels=labels, centroids=centroids(matrix, labels), params=params)


def fit_clusters(
    matrix: np.ndarray, params: DbscanParams, *, all_outlier_fallback: bool = True
) -> ClusterModel:
    """DBSCAN plus the degenerate-case rule: if everything is an outlier,
    treat all points as one cluster 0 (downstream generation needs >= 1)."""
    model = dbscan_cosine(matrix, params)
    if all_outlier_fallback and model.n_clusters == 0:
        labels = np.zeros(matrix.shape[0], dtype=np.int64)
        model = ClusterModel(labels=labels, centroids=centroids(matrix, labels), params=params)
    return model


def centroids(matrix: np.ndarray, labels: np.ndarray) -> dict[int, np.ndarray]:
    """Arithmetic mean of member rows per non-outlier cluster, raw vectors."""
    out: dict[int, np.ndarray] = {}
    for cid in sorted(int(c) for c in np.unique(labels) if c >= 0):
        members = np.flatnonzero(labels == cid)
        out[cid] = matrix[members].mean(axis=0)
    return out


def select_cluster(target_embedding: np.ndarray, model: ClusterModel) -> int:
    """Centroid with highest cosine similarity; ties go to the lowest id."""
    if not model.centroids:
        raise NoClusters("cluster model has no non-outlier cluster")
    target = np.asarray(target_embedding, dtype=np.float64)
    t_norm = np.linalg.norm(target)
    if t_norm == 0.0:
        raise DegenerateInput("target embedding has zero norm")
    best_id, best_sim = -1, -np.inf
    for cid in sorted(model.centroids):
        c = model.centroids[cid]
        c_norm = np.linalg.norm(c)
        sim = -np.inf if c_norm == 0.0 else float(target @ c / (t_norm * c_norm))
        if sim > best_sim:
            best_id, best_sim = cid, sim
    if best_id < 0:
        raise DegenerateInput("every centroid has zero norm")
    return best_id
