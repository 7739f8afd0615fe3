"""
Stage Parameters

Typed hyperparameter groups for each pipeline stage. PipelineConfig derives
these from its flat field set; library callers can build them directly.
"""

import math
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator


class EdgeWeightParams(BaseModel):
    """Edge-weight decay parameters."""

    model_config = ConfigDict(frozen=True)

    alpha: float = Field(default=1.15, gt=1.0)


class FastRPConfig(BaseModel):
    """Very sparse random projection settings."""

    model_config = ConfigDict(frozen=True)

    epsilon: int = Field(default=32, ge=2)
    iteration_weights: List[float] = Field(default_factory=lambda: [1.0, 0.5, 0.5])
    sparsity_s: float = Field(default=3.0, ge=1.0)
    seed: int = Field(default=7, ge=0)

    @field_validator("iteration_weights")
    @classmethod
    def _non_empty(cls, value: List[float]) -> List[float]:
        if not value:
            raise ValueError("iteration_weights needs at least the initial-vector weight")
        return value

    @property
    def degree(self) -> int:
        """Number of propagation steps."""
        return len(self.iteration_weights) - 1


class WindowConfig(BaseModel):
    """Sliding-window example construction settings."""

    model_config = ConfigDict(frozen=True)

    beta: int = Field(default=128, ge=1)
    gamma: int = Field(default=32, ge=2)
    epsilon: int = Field(default=32, ge=2)
    stride: int = Field(default=64, ge=1)


class TrainConfig(BaseModel):
    """Angular-margin training settings."""

    model_config = ConfigDict(frozen=True)

    scale_s: float = Field(default=30.0, gt=0.0)
    margin_m: float = Field(default=0.5, ge=0.0, lt=math.pi / 2)
    learning_rate: float = Field(default=1e-3, gt=0.0)
    momentum: float = Field(default=0.9, ge=0.0, lt=1.0)
    batch_size: int = Field(default=64, ge=1)
    epochs: int = Field(default=30, ge=1)
    seed: int = Field(default=7, ge=0)


class ForestConfig(BaseModel):
    """Random forest settings."""

    model_config = ConfigDict(frozen=True)

    n_trees: int = Field(default=100, ge=1)
    max_features: Optional[Literal["sqrt", "log2"]] = "sqrt"
    bootstrap: bool = True
    seed: int = Field(default=7, ge=0)
