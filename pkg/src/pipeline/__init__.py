"""Pipeline Package - stage runner and artifact store for the CLI."""

from .artifacts import ARTIFACTS, MANIFEST_FILE, ArtifactStore, file_digest
from .runner import STAGES, PipelineRunner

__all__ = [
    "ARTIFACTS",
    "MANIFEST_FILE",
    "STAGES",
    "ArtifactStore",
    "PipelineRunner",
    "file_digest",
]
