"""
Error Types

Every failure the pipeline reports is a FlowEmbedError subclass. Each carries a
stable error_code and a details dict so the CLI can emit the same structured
result shape used for successful stages:

    {"status": "error", "error_code": "...", "message": "...", "details": {...}}
"""

from typing import Any, Dict, Optional


class FlowEmbedError(Exception):
    """Base class for all pipeline errors."""

    error_code = "FLOWEMBED_ERROR"

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details: Dict[str, Any] = details

    def to_dict(self) -> Dict[str, Any]:
        """Convert to the structured error result."""
        result: Dict[str, Any] = {
            "status": "error",
            "error_code": self.error_code,
            "message": self.message,
        }
        if self.details:
            result["details"] = self.details
        return result


# =============================================================================
# Input data
# =============================================================================

class SchemaError(FlowEmbedError):
    """Flow CSV header does not match the schema."""

    error_code = "SCHEMA_ERROR"

    def __init__(self, message: str, column: str):
        super().__init__(message, column=column)
        self.column = column


class RowError(FlowEmbedError):
    """A flow CSV row failed to parse or validate."""

    error_code = "ROW_ERROR"

    def __init__(self, message: str, line: int, field: Optional[str] = None):
        super().__init__(message, line=line, field=field)
        self.line = line
        self.field = field


class EmptyDatasetError(FlowEmbedError):
    error_code = "EMPTY_DATASET"


class StratificationError(FlowEmbedError):
    """A class cannot be split into train and test."""

    error_code = "STRATIFICATION_ERROR"

    def __init__(self, message: str, label: Optional[str] = None):
        super().__init__(message, label=label)
        self.label = label


class UnknownLabelError(FlowEmbedError):
    error_code = "UNKNOWN_LABEL"

    def __init__(self, label: str, available: list):
        super().__init__(
            f"Unknown class label '{label}'; available labels: {', '.join(available)}",
            label=label,
            available=available,
        )
        self.label = label
        self.available = available


# =============================================================================
# Configuration and artifacts
# =============================================================================

class ConfigError(FlowEmbedError):
    error_code = "CONFIG_ERROR"


class ArtifactMismatchError(FlowEmbedError):
    """An upstream artifact was produced by a different configuration."""

    error_code = "ARTIFACT_MISMATCH"


class MissingArtifactError(FlowEmbedError):
    error_code = "MISSING_INPUT"


class FormatError(FlowEmbedError):
    """A binary artifact is truncated or has the wrong magic."""

    error_code = "FORMAT_ERROR"


class VersionError(FlowEmbedError):
    error_code = "VERSION_ERROR"


# =============================================================================
# Numerics
# =============================================================================

class ShapeError(FlowEmbedError):
    error_code = "SHAPE_ERROR"


class NonFiniteError(FlowEmbedError):
    """A NaN or Inf appeared in a tensor."""

    error_code = "NON_FINITE"


class ZeroVectorError(FlowEmbedError):
    error_code = "ZERO_VECTOR"


class BoundsError(FlowEmbedError):
    error_code = "BOUNDS_ERROR"


class UndefinedMetricError(FlowEmbedError):
    error_code = "UNDEFINED_METRIC"


class PreconditionError(FlowEmbedError):
    error_code = "PRECONDITION_FAILED"
