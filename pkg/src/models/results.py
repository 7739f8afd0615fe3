"""
Result Models

Pydantic models for downstream-task and metric results. All serialize to JSON
with a stable key order via `to_json()`.
"""

import json
from typing import Dict, List, Optional

from pydantic import BaseModel, Field


class _StableJson(BaseModel):
    def to_json(self) -> str:
        """Serialize with sorted keys and two-space indent."""
        return json.dumps(self.model_dump(), indent=2, sort_keys=True)


class ZdtResult(_StableJson):
    """Per-query zero-day-threat probabilities and thresholded predictions."""

    zdt_probability: List[float]
    is_holdout: List[bool]
    predictions: List[bool]
    threshold: float


class CataEntry(BaseModel):
    rank: int
    attributed_class: str
    frequency: float
    count: int
    avg_probability: float


class CataResult(_StableJson):
    """Closest attack type attribution for one holdout class."""

    holdout_class: str
    n_examples: int
    entries: List[CataEntry] = Field(default_factory=list)


class ClassMetrics(BaseModel):
    precision: float
    recall: float
    auc: float
    support: int


class ClassificationReport(_StableJson):
    """One-vs-rest per-class metrics with macro and worst-class summaries."""

    per_class: Dict[str, ClassMetrics]
    macro: ClassMetrics
    minimum: ClassMetrics
    excluded_classes: List[str] = Field(default_factory=list)


class DetectionMetrics(BaseModel):
    precision: float
    recall: float
    pr_auc: float
    threshold: float
    n_positive: int
    n_negative: int


class MetricReport(_StableJson):
    """Clustering quality of an embedding set plus optional detection metrics."""

    silhouette: float = Field(ge=-1.0, le=1.0)
    completeness: float = Field(ge=0.0, le=1.0)
    homogeneity: float = Field(ge=0.0, le=1.0)
    rand_index: float = Field(ge=0.0, le=1.0)
    adjusted_rand_index: Optional[float] = None
    cluster_mode: str = "kmeans"
    n_points: int = 0
    n_classes: int = 0
    classification: Optional[ClassificationReport] = None
    detection: Optional[DetectionMetrics] = None


class EpochLoss(BaseModel):
    epoch: int
    mean_loss: float
    batches: int


class TrainingLog(_StableJson):
    """Per-epoch mean loss of one training run."""

    classes: List[str]
    n_train: int
    holdout_class: Optional[str] = None
    epochs: List[EpochLoss] = Field(default_factory=list)

    @property
    def losses(self) -> List[float]:
        return [epoch.mean_loss for epoch in self.epochs]
