"""
Artifact Store

File names of every stage output plus `manifest.json`, which maps each
artifact to the stage hash that produced it. Reading an upstream artifact
checks its recorded hash against the hash the current configuration expects.
"""

import hashlib
import json
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence, Union

import pandas as pd

from src.errors import ArtifactMismatchError, MissingArtifactError
from src.models import CataResult, ZdtResult
from src.utils import get_logger

logger = get_logger(__name__)

MANIFEST_FILE = "manifest.json"

ARTIFACTS: Dict[str, str] = {
    "flows": "flows.csv",
    "profiles": "profiles.json",
    "graph": "graph.csv",
    "nodes": "nodes.csv",
    "examples": "examples.stpx",
    "split": "split.json",
    "model": "model.stpcn",
    "train_log": "train_log.json",
    "embeddings": "embeddings.csv",
    "inference_embeddings": "inference_embeddings.csv",
    "classify": "classify.json",
    "zdt": "zdt.csv",
    "pr_curve": "pr_curve.csv",
    "zdt_sweep": "zdt_sweep.csv",
    "cata": "cata.csv",
    "metrics": "metrics.json",
    "projection": "projection.csv",
    "report": "report.txt",
}


def file_digest(path: Union[str, Path]) -> str:
    """SHA-256 of a file's bytes."""
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


class ArtifactStore:
    """Stage outputs of one run directory."""

    def __init__(self, out_dir: Union[str, Path], force: bool = False):
        self.out_dir = Path(out_dir)
        self.force = force

    @property
    def manifest_path(self) -> Path:
        return self.out_dir / MANIFEST_FILE

    def path(self, name: str) -> Path:
        return self.out_dir / ARTIFACTS[name]

    def manifest(self) -> Dict[str, Dict[str, str]]:
        if not self.manifest_path.is_file():
            return {}
        return json.loads(self.manifest_path.read_text(encoding="utf-8"))

    def record(self, name: str, stage_hash: str, **meta: Any) -> Path:
        """Register an artifact that was just written, with optional extra fields."""
        manifest = self.manifest()
        manifest[name] = {"file": ARTIFACTS[name], "hash": stage_hash, **meta}
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.manifest_path.write_text(
            json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        return self.path(name)

    def recorded(self, name: str, key: str) -> Any:
        """A field stored with an artifact's manifest entry, or None."""
        return self.manifest().get(name, {}).get(key)

    def require(self, name: str, expected_hash: str) -> Path:
        """
        Path of an upstream artifact produced under the expected hash.

        Raises:
            MissingArtifactError: the file does not exist
            ArtifactMismatchError: recorded hash differs and force is off
        """
        path = self.path(name)
        if not path.is_file():
            raise MissingArtifactError(
                f"Required artifact '{name}' not found at {path}", artifact=name, path=str(path)
            )
        recorded = self.manifest().get(name, {}).get("hash")
        if recorded != expected_hash:
            if not self.force:
                raise ArtifactMismatchError(
                    f"Artifact '{name}' was produced by a different configuration; "
                    "rerun the upstream stage or pass --force",
                    artifact=name,
                    recorded=recorded,
                    expected=expected_hash,
                )
            logger.warning("artifact_hash_mismatch_forced", artifact=name)
        return path

    def digest(self, name: str) -> str:
        path = self.path(name)
        if not path.is_file():
            raise MissingArtifactError(
                f"Required artifact '{name}' not found at {path}", artifact=name, path=str(path)
            )
        return file_digest(path)

    # -------------------------------------------------------------------------
    # Writers
    # -------------------------------------------------------------------------

    def write_json(self, name: str, payload: Any) -> Path:
        path = self.path(name)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path

    def read_json(self, name: str) -> Any:
        return json.loads(self.path(name).read_text(encoding="utf-8"))

    def write_rows(self, name: str, rows: Sequence[Dict[str, Any]], columns: Iterable[str]) -> Path:
        path = self.path(name)
        path.parent.mkdir(parents=True, exist_ok=True)
        pd.DataFrame(list(rows), columns=list(columns)).to_csv(path, index=False, lineterminator="\n")
        return path


def zdt_rows(result: ZdtResult, example_ids: Sequence[int]) -> List[Dict[str, Any]]:
    return [
        {"example_id": example_id, "true_is_holdout": int(flag), "zdt_probability": probability}
        for example_id, flag, probability in zip(
            example_ids, result.is_holdout, result.zdt_probability
        )
    ]


def cata_rows(result: CataResult) -> List[Dict[str, Any]]:
    return [
        {
            "holdout_class": result.holdout_class,
            "rank": entry.rank,
            "attributed_class": entry.attributed_class,
            "frequency": entry.frequency,
            "avg_probability": entry.avg_probability,
        }
        for entry in result.entries
    ]


ZDT_COLUMNS = ("example_id", "true_is_holdout", "zdt_probability")
CATA_COLUMNS = ("holdout_class", "rank", "attributed_class", "frequency", "avg_probability")
PR_COLUMNS = ("threshold", "precision", "recall")
SWEEP_COLUMNS = (
    "holdout_class",
    "pr_auc",
    "precision",
    "recall",
    "cata_top1",
    "cata_top1_probability",
)
