"""
Clustering Metrics

Embedding-geometry and cluster-agreement scores:

- silhouette on ground-truth labels (Euclidean, singleton points score 0)
- homogeneity / completeness (conditional-entropy definitions)
- plain and adjusted Rand index
- k-means assignments used as the predicted clustering
"""

from typing import Optional, Sequence

import numpy as np
from scipy.spatial.distance import cdist
from sklearn.cluster import KMeans
from sklearn.metrics import (
    adjusted_rand_score,
    homogeneity_completeness_v_measure,
    rand_score,
    silhouette_score,
)

from src.errors import PreconditionError, ShapeError, UndefinedMetricError
from src.models import ClassificationReport, DetectionMetrics, MetricReport
from src.utils import get_logger

logger = get_logger(__name__)

CLUSTER_MODES = ("kmeans", "truth")


def _check_lengths(truth: Sequence, predicted: Sequence) -> None:
    if len(truth) != len(predicted):
        raise ShapeError(
            f"Label lists differ in length: {len(truth)} vs {len(predicted)}",
            truth=len(truth),
            predicted=len(predicted),
        )


def _unit(value: float) -> float:
    # entropy ratios can overshoot [0, 1] by rounding
    return float(min(1.0, max(0.0, value)))


def silhouette(points: np.ndarray, labels: Sequence) -> float:
    """
    Mean silhouette coefficient over all points.

    Raises:
        UndefinedMetricError: fewer than 2 clusters
    """
    points = np.asarray(points, dtype=np.float64)
    _check_lengths(points, labels)
    n_clusters = len(set(labels))
    if n_clusters < 2:
        raise UndefinedMetricError(
            f"Silhouette needs at least 2 clusters, found {n_clusters}", clusters=n_clusters
        )
    if n_clusters == len(labels):
        # every point is a singleton
        return 0.0
    distances = cdist(points, points)
    return float(silhouette_score(distances, np.asarray(labels), metric="precomputed"))


def homogeneity(truth: Sequence, predicted: Sequence) -> float:
    """1 - H(truth | predicted) / H(truth); 1.0 when H(truth) = 0."""
    _check_lengths(truth, predicted)
    return _unit(homogeneity_completeness_v_measure(truth, predicted)[0])


def completeness(truth: Sequence, predicted: Sequence) -> float:
    """1 - H(predicted | truth) / H(predicted); 1.0 when H(predicted) = 0."""
    _check_lengths(truth, predicted)
    return _unit(homogeneity_completeness_v_measure(truth, predicted)[1])


def rand_index(truth: Sequence, predicted: Sequence) -> float:
    """Fraction of unordered point pairs on which both labelings agree."""
    _check_lengths(truth, predicted)
    if len(truth) < 2:
        raise UndefinedMetricError("Rand index needs at least 2 points")
    return float(rand_score(truth, predicted))


def adjusted_rand_index(truth: Sequence, predicted: Sequence) -> float:
    _check_lengths(truth, predicted)
    if len(truth) < 2:
        raise UndefinedMetricError("Adjusted Rand index needs at least 2 points")
    return float(adjusted_rand_score(truth, predicted))


def kmeans_assignments(points: np.ndarray, n_clusters: int, seed: int = 7) -> np.ndarray:
    """Cluster ids from seeded k-means (10 restarts)."""
    points = np.asarray(points, dtype=np.float64)
    if not 1 <= n_clusters <= points.shape[0]:
        raise PreconditionError(
            f"k-means with {n_clusters} clusters on {points.shape[0]} points",
            clusters=n_clusters,
        )
    kmeans = KMeans(n_clusters=n_clusters, n_init=10, random_state=seed)
    return kmeans.fit_predict(points)


def embedding_report(
    embeddings: np.ndarray,
    labels: Sequence[str],
    cluster_mode: str = "kmeans",
    predicted: Optional[Sequence[str]] = None,
    seed: int = 7,
    classification: Optional[ClassificationReport] = None,
    detection: Optional[DetectionMetrics] = None,
) -> MetricReport:
    """
    Score an embedding set.

    Silhouette always uses ground-truth labels. Completeness, homogeneity and
    the Rand indices compare truth with k-means assignments (k = number of
    classes) in "kmeans" mode, or with `predicted` (e.g. classifier output)
    in "truth" mode.
    """
    if cluster_mode not in CLUSTER_MODES:
        raise PreconditionError(
            f"Unknown cluster mode '{cluster_mode}'; expected one of {', '.join(CLUSTER_MODES)}"
        )
    classes = sorted(set(labels))
    if cluster_mode == "kmeans":
        assignments = list(kmeans_assignments(embeddings, len(classes), seed))
    else:
        if predicted is None:
            raise PreconditionError("Cluster mode 'truth' needs predicted labels")
        assignments = list(predicted)

    report = MetricReport(
        silhouette=silhouette(embeddings, labels),
        completeness=completeness(labels, assignments),
        homogeneity=homogeneity(labels, assignments),
        rand_index=rand_index(labels, assignments),
        adjusted_rand_index=adjusted_rand_index(labels, assignments),
        cluster_mode=cluster_mode,
        n_points=len(labels),
        n_classes=len(classes),
        classification=classification,
        detection=detection,
    )
    logger.info(
        "embedding_scored",
        silhouette=round(report.silhouette, 4),
        homogeneity=round(report.homogeneity, 4),
        rand_index=round(report.rand_index, 4),
        cluster_mode=cluster_mode,
    )
    return report
