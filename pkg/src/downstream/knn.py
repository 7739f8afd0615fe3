"""
Distance-Weighted KNN

Brute-force k-nearest-neighbor membership probabilities over frozen
embeddings. Each of the k nearest training points votes 1/d for its class;
votes are normalized to a probability per class. A query within 1e-12 of a
training point takes that point's class with probability 1.
"""

from dataclasses import dataclass
from typing import Dict, List, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from src.errors import ConfigError, PreconditionError, ShapeError

EXACT_MATCH = 1e-12


@dataclass(frozen=True)
class KnnModel:
    """Stored training embeddings; fitting does no learning."""

    embeddings: np.ndarray
    labels: np.ndarray
    classes: List[str]
    k: int

    @property
    def n(self) -> int:
        return int(self.embeddings.shape[0])


def knn_fit(embeddings: np.ndarray, labels: Sequence[str], k: int = 350) -> KnnModel:
    """
    Store training data for later queries.

    Raises:
        PreconditionError: no training points or labels/rows differ in count
        ConfigError: k < 1 or k > n
    """
    embeddings = np.asarray(embeddings, dtype=np.float64)
    if embeddings.ndim != 2 or embeddings.shape[0] == 0:
        raise PreconditionError(f"knn_fit needs a non-empty [n, d] matrix, got {embeddings.shape}")
    if len(labels) != embeddings.shape[0]:
        raise PreconditionError(
            f"{len(labels)} labels for {embeddings.shape[0]} embeddings",
            labels=len(labels),
            rows=embeddings.shape[0],
        )
    n = embeddings.shape[0]
    if not 1 <= k <= n:
        raise ConfigError(f"k={k} must be between 1 and the {n} training points", k=k, n=n)
    return KnnModel(
        embeddings=embeddings.copy(),
        labels=np.asarray(list(labels), dtype=object),
        classes=sorted(set(labels)),
        k=k,
    )


def knn_predict_proba_batch(
    model: KnnModel, queries: np.ndarray, chunk_size: int = 1024
) -> np.ndarray:
    """
    Membership probabilities for many queries.

    Returns:
        [n_queries, n_classes] with columns in `model.classes` order
    """
    queries = np.asarray(queries, dtype=np.float64)
    if queries.ndim == 1:
        queries = queries[np.newaxis, :]
    if queries.shape[1] != model.embeddings.shape[1]:
        raise ShapeError(
            f"Query dimension {queries.shape[1]} does not match training dimension "
            f"{model.embeddings.shape[1]}"
        )
    class_index = {label: i for i, label in enumerate(model.classes)}
    neighbor_class = np.array([class_index[label] for label in model.labels], dtype=np.int64)
    out = np.zeros((queries.shape[0], len(model.classes)))

    for start in range(0, queries.shape[0], chunk_size):
        distances = cdist(queries[start:start + chunk_size], model.embeddings)
        # stable: equal distances keep training order
        nearest = np.argsort(distances, axis=1, kind="stable")[:, : model.k]
        for row, neighbors in enumerate(nearest):
            d = distances[row, neighbors]
            probs = out[start + row]
            if d[0] < EXACT_MATCH:
                probs[neighbor_class[neighbors[0]]] = 1.0
                continue
            np.add.at(probs, neighbor_class[neighbors], 1.0 / d)
            probs /= probs.sum()
    return out


def knn_predict_proba(model: KnnModel, query: np.ndarray) -> Dict[str, float]:
    """Class -> probability for one query; every training class is present."""
    probs = knn_predict_proba_batch(model, query)[0]
    return {label: float(p) for label, p in zip(model.classes, probs)}


def knn_predict(model: KnnModel, queries: np.ndarray) -> List[str]:
    """Most probable class per query (ties go to the first class in sorted order)."""
    probs = knn_predict_proba_batch(model, queries)
    return [model.classes[i] for i in probs.argmax(axis=1)]
