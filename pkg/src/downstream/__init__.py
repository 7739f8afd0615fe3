"""Downstream Package - KNN, random forest, zero-day detection and attack attribution."""

from .forest import RandomForestModel, rf_fit, rf_predict, rf_predict_proba
from .knn import KnnModel, knn_fit, knn_predict, knn_predict_proba, knn_predict_proba_batch
from .tasks import cata, zdt_scores

__all__ = [
    "KnnModel",
    "RandomForestModel",
    "cata",
    "knn_fit",
    "knn_predict",
    "knn_predict_proba",
    "knn_predict_proba_batch",
    "rf_fit",
    "rf_predict",
    "rf_predict_proba",
    "zdt_scores",
]
