"""Metrics Package - Clustering quality, detection metrics and projection."""

from .clustering import (
    CLUSTER_MODES,
    adjusted_rand_index,
    completeness,
    embedding_report,
    homogeneity,
    kmeans_assignments,
    rand_index,
    silhouette,
)
from .detection import (
    classification_report,
    detection_metrics,
    pr_auc,
    pr_curve,
    precision_recall,
)
from .projection import pca3_projection

__all__ = [
    "CLUSTER_MODES",
    "adjusted_rand_index",
    "classification_report",
    "completeness",
    "detection_metrics",
    "embedding_report",
    "homogeneity",
    "kmeans_assignments",
    "pca3_projection",
    "pr_auc",
    "pr_curve",
    "precision_recall",
    "rand_index",
    "silhouette",
]
