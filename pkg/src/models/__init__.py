"""Models Package - Data models for flows, examples, stage parameters and results."""

from .examples import Example
from .flows import FLOW_COLUMNS, DatasetSplit, FlowDataset, FlowRecord
from .params import EdgeWeightParams, FastRPConfig, ForestConfig, TrainConfig, WindowConfig
from .profiles import ClassProfile
from .results import (
    CataEntry,
    CataResult,
    ClassificationReport,
    ClassMetrics,
    DetectionMetrics,
    EpochLoss,
    MetricReport,
    TrainingLog,
    ZdtResult,
)

__all__ = [
    "Example",
    "FLOW_COLUMNS",
    "DatasetSplit",
    "FlowDataset",
    "FlowRecord",
    "EdgeWeightParams",
    "FastRPConfig",
    "ForestConfig",
    "TrainConfig",
    "WindowConfig",
    "ClassProfile",
    "CataEntry",
    "CataResult",
    "ClassificationReport",
    "ClassMetrics",
    "DetectionMetrics",
    "EpochLoss",
    "MetricReport",
    "TrainingLog",
    "ZdtResult",
]
