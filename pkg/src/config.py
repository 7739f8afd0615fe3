"""
Pipeline Configuration

One flat settings model for every stage. Values resolve, highest priority
first, from:

1. explicit overrides (CLI flags)
2. FLOWEMBED_* environment variables
3. the config file given with --config (flat JSON, or TOML)
4. field defaults

Defaults follow the published setup: alpha 1.15, beta 128, gamma = epsilon = 32.
"""

import hashlib
import json
import math
from contextvars import ContextVar
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Type, Union

from pydantic import Field, ValidationError, field_validator
from pydantic_settings import (
    BaseSettings,
    JsonConfigSettingsSource,
    PydanticBaseSettingsSource,
    SettingsConfigDict,
    TomlConfigSettingsSource,
)

from src.errors import ConfigError, MissingArtifactError
from src.models import EdgeWeightParams, FastRPConfig, ForestConfig, TrainConfig, WindowConfig

RESOLVED_CONFIG_FILE = "config.resolved.json"

_config_file: ContextVar[Optional[Path]] = ContextVar("flowembed_config_file", default=None)


# Fields whose values change a stage's artifact, cumulative over upstream stages.
# The holdout class is left out of the graph.
_GRAPH_FIELDS = ("alpha", "holdout")
_NODE_FIELDS = _GRAPH_FIELDS + ("epsilon", "iteration_weights", "sparsity", "seed")
_EXAMPLE_FIELDS = _NODE_FIELDS + ("beta", "gamma", "stride", "unknown_ip_policy")
_SPLIT_FIELDS = _EXAMPLE_FIELDS + ("split_ratio",)
_MODEL_FIELDS = _SPLIT_FIELDS + (
    "scale_s",
    "margin_m",
    "learning_rate",
    "momentum",
    "batch_size",
    "epochs",
)
STAGE_FIELDS: Dict[str, Tuple[str, ...]] = {
    "synth": ("seed", "synth_classes", "flows_per_class", "profiles"),
    "graph": _GRAPH_FIELDS,
    "nodes": _NODE_FIELDS,
    "examples": _EXAMPLE_FIELDS,
    "split": _SPLIT_FIELDS,
    "model": _MODEL_FIELDS,
    "embeddings": _MODEL_FIELDS,
}


class PipelineConfig(BaseSettings):
    """All hyperparameters plus input/output paths."""

    model_config = SettingsConfigDict(
        env_prefix="FLOWEMBED_",
        extra="forbid",
        frozen=True,
    )

    # Graph and node embeddings
    alpha: float = Field(default=1.15, gt=1.0)
    epsilon: int = Field(default=32, ge=2)
    iteration_weights: List[float] = Field(default_factory=lambda: [1.0, 0.5, 0.5])
    sparsity: float = Field(default=3.0, ge=1.0)

    # Windows
    beta: int = Field(default=128, ge=1)
    gamma: int = Field(default=32, ge=2)
    stride: int = Field(default=64, ge=1)
    unknown_ip_policy: Literal["zero", "fresh"] = "zero"

    # Training
    scale_s: float = Field(default=30.0, gt=0.0)
    margin_m: float = Field(default=0.5, ge=0.0, lt=math.pi / 2)
    learning_rate: float = Field(default=1e-3, gt=0.0)
    momentum: float = Field(default=0.9, ge=0.0, lt=1.0)
    batch_size: int = Field(default=64, ge=1)
    epochs: int = Field(default=30, ge=1)

    # Split and downstream tasks
    split_ratio: float = Field(default=0.7, gt=0.0, lt=1.0)
    holdout: Optional[str] = None
    knn_k: int = Field(default=350, ge=1)
    zdt_threshold: float = Field(default=0.5, ge=0.0, le=1.0)
    forest_trees: int = Field(default=100, ge=1)
    forest_max_features: Optional[Literal["sqrt", "log2"]] = "sqrt"
    repeats: int = Field(default=5, ge=1)
    cluster_mode: Literal["kmeans", "truth"] = "kmeans"

    # Synthetic data
    synth_classes: int = Field(default=10, ge=2)
    flows_per_class: int = Field(default=2000, ge=1)
    profiles: Optional[Path] = None

    seed: int = Field(default=7, ge=0)

    # Paths and logging
    out_dir: Path = Path("runs/default")
    input_flows: Optional[Path] = None
    log_level: str = "INFO"
    log_format: Literal["console", "json"] = "console"

    @field_validator("iteration_weights")
    @classmethod
    def _non_empty_weights(cls, value: List[float]) -> List[float]:
        if not value:
            raise ValueError("iteration_weights needs at least the initial-vector weight")
        return value

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: Type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> Tuple[PydanticBaseSettingsSource, ...]:
        sources: List[PydanticBaseSettingsSource] = [init_settings, env_settings]
        path = _config_file.get()
        if path is not None:
            if path.suffix == ".toml":
                sources.append(TomlConfigSettingsSource(settings_cls, toml_file=path))
            else:
                sources.append(JsonConfigSettingsSource(settings_cls, json_file=path))
        return tuple(sources)

    # -------------------------------------------------------------------------
    # Stage parameter groups
    # -------------------------------------------------------------------------

    def edge_params(self) -> EdgeWeightParams:
        return EdgeWeightParams(alpha=self.alpha)

    def fastrp_config(self) -> FastRPConfig:
        return FastRPConfig(
            epsilon=self.epsilon,
            iteration_weights=self.iteration_weights,
            sparsity_s=self.sparsity,
            seed=self.seed,
        )

    def window_config(self) -> WindowConfig:
        return WindowConfig(beta=self.beta, gamma=self.gamma, epsilon=self.epsilon, stride=self.stride)

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            scale_s=self.scale_s,
            margin_m=self.margin_m,
            learning_rate=self.learning_rate,
            momentum=self.momentum,
            batch_size=self.batch_size,
            epochs=self.epochs,
            seed=self.seed,
        )

    def forest_config(self) -> ForestConfig:
        return ForestConfig(
            n_trees=self.forest_trees, max_features=self.forest_max_features, seed=self.seed
        )

    # -------------------------------------------------------------------------
    # Hashing and echo
    # -------------------------------------------------------------------------

    def resolved(self) -> Dict[str, Any]:
        """Every field as JSON-compatible values."""
        return self.model_dump(mode="json")

    def stage_hash(self, stage: str, upstream: str = "") -> str:
        """
        SHA-256 of the fields that shape `stage`'s artifact.

        Args:
            stage: One of STAGE_FIELDS
            upstream: Digest of the input data the stage ultimately derives from
        """
        if stage not in STAGE_FIELDS:
            raise ConfigError(f"Unknown stage '{stage}'", stage=stage)
        values = self.resolved()
        payload = {name: values[name] for name in STAGE_FIELDS[stage]}
        payload["__stage__"] = stage
        payload["__upstream__"] = upstream
        canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def write_resolved(self, out_dir: Optional[Path] = None) -> Path:
        path = Path(out_dir or self.out_dir) / RESOLVED_CONFIG_FILE
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.resolved(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path


def load_config(path: Optional[Union[str, Path]] = None, **overrides: Any) -> PipelineConfig:
    """
    Resolve the pipeline configuration.

    Args:
        path: Optional JSON or TOML config file
        **overrides: Highest-priority values; None entries are ignored

    Raises:
        MissingArtifactError: path does not exist
        ConfigError: unknown key or invalid value
    """
    config_path = Path(path) if path is not None else None
    if config_path is not None and not config_path.is_file():
        raise MissingArtifactError(f"Config file not found: {config_path}", path=str(config_path))
    token = _config_file.set(config_path)
    try:
        return PipelineConfig(**{k: v for k, v in overrides.items() if v is not None})
    except ValidationError as exc:
        first = exc.errors()[0]
        key = ".".join(str(part) for part in first["loc"])
        raise ConfigError(
            f"Invalid configuration key '{key}': {first['msg']}",
            key=key,
            errors=len(exc.errors()),
        ) from exc
    finally:
        _config_file.reset(token)
