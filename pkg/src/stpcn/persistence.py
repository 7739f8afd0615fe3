"""
Model and Embedding Persistence

Model file layout (little-endian):

    b"STPCNv1" | header_len: uint32 | header: utf-8 JSON | parameters

The JSON header carries the format version, gamma, epsilon, s, m, class
labels, holdout class, config hash and an ordered list of parameter names and
shapes. Parameters follow as row-major float64 arrays in header order.

Embeddings are written as CSV `example_id,label,e0,...,e63` with floats in
shortest round-trip form.
"""

import json
import struct
from pathlib import Path
from typing import Any, Dict, List, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from src.errors import FormatError, MissingArtifactError, SchemaError, VersionError
from src.nn import parameter

from .model import StpcnModel

MAGIC = b"STPCNv1"
FORMAT_VERSION = "stpcn-v1"
_HEADER_LEN = struct.Struct("<I")


def save_model(model: StpcnModel, path: Union[str, Path]) -> Path:
    """Write `model` to `path`, creating parent directories."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header: Dict[str, Any] = {
        "version": FORMAT_VERSION,
        "gamma": model.gamma,
        "epsilon": model.epsilon,
        "scale_s": model.scale_s,
        "margin_m": model.margin_m,
        "classes": model.classes,
        "holdout_class": model.holdout_class,
        "config_hash": model.config_hash,
        "params": [
            {"name": name, "shape": list(tensor.shape)} for name, tensor in model.params.items()
        ],
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(_HEADER_LEN.pack(len(header_bytes)))
        f.write(header_bytes)
        for tensor in model.params.values():
            f.write(np.ascontiguousarray(tensor.data, dtype="<f8").tobytes())
    return path


def read_model_header(path: Union[str, Path]) -> Tuple[Dict[str, Any], bytes, int]:
    """
    Validate magic and version and parse the JSON header.

    Returns:
        (header dict, whole file bytes, offset of the first parameter byte)
    """
    path = Path(path)
    if not path.is_file():
        raise MissingArtifactError(f"Model file not found: {path}", path=str(path))
    buffer = path.read_bytes()
    if buffer[: len(MAGIC)] != MAGIC:
        raise FormatError(f"Bad magic in {path}; expected {MAGIC!r}")
    offset = len(MAGIC)
    if len(buffer) < offset + _HEADER_LEN.size:
        raise FormatError(f"Truncated model header in {path}")
    (header_len,) = _HEADER_LEN.unpack_from(buffer, offset)
    offset += _HEADER_LEN.size
    if len(buffer) < offset + header_len:
        raise FormatError(f"Truncated model header in {path}")
    try:
        header = json.loads(buffer[offset:offset + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"Unreadable model header in {path}: {exc}") from exc
    version = header.get("version")
    if version != FORMAT_VERSION:
        raise VersionError(
            f"Model format version '{version}' is not supported (expected '{FORMAT_VERSION}')",
            found=version,
            expected=FORMAT_VERSION,
        )
    return header, buffer, offset + header_len


def load_model(path: Union[str, Path]) -> StpcnModel:
    """
    Read a model written by save_model.

    Raises:
        FormatError: bad magic, unreadable header, truncated or oversized payload
        VersionError: header version is not stpcn-v1
    """
    header, buffer, offset = read_model_header(path)
    params = {}
    for spec in header["params"]:
        shape = tuple(int(d) for d in spec["shape"])
        count = int(np.prod(shape)) if shape else 1
        end = offset + count * 8
        if end > len(buffer):
            raise FormatError(f"Truncated parameter '{spec['name']}' in {path}")
        data = np.frombuffer(buffer, dtype="<f8", count=count, offset=offset)
        params[spec["name"]] = parameter(data.reshape(shape))
        offset = end
    if offset != len(buffer):
        raise FormatError(f"{len(buffer) - offset} unexpected trailing bytes in {path}")
    return StpcnModel(
        gamma=int(header["gamma"]),
        epsilon=int(header["epsilon"]),
        classes=list(header["classes"]),
        scale_s=float(header["scale_s"]),
        margin_m=float(header["margin_m"]),
        params=params,
        holdout_class=header.get("holdout_class"),
        config_hash=header.get("config_hash", ""),
    )


# =============================================================================
# Embedding CSV
# =============================================================================

def write_embeddings_csv(
    embeddings: np.ndarray,
    labels: Sequence[str],
    path: Union[str, Path],
    example_ids: Sequence[int] = (),
) -> Path:
    """Write `example_id,label,e0..` rows; ids default to 0..n-1."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    ids = list(example_ids) or list(range(len(labels)))
    frame = pd.DataFrame(embeddings, columns=[f"e{i}" for i in range(embeddings.shape[1])])
    frame.insert(0, "label", list(labels))
    frame.insert(0, "example_id", ids)
    frame.to_csv(path, index=False, float_format=None, lineterminator="\n")
    return path


def read_embeddings_csv(path: Union[str, Path]) -> Tuple[List[int], List[str], np.ndarray]:
    """Read an embedding CSV back into (example ids, labels, [n, d] matrix)."""
    path = Path(path)
    if not path.is_file():
        raise MissingArtifactError(f"Embedding file not found: {path}", path=str(path))
    frame = pd.read_csv(path, dtype={"label": str}, keep_default_na=False, float_precision="round_trip")
    for column in ("example_id", "label"):
        if column not in frame.columns:
            raise SchemaError(f"Embedding CSV {path} lacks column '{column}'", column=column)
    vector_columns = [c for c in frame.columns if c.startswith("e") and c[1:].isdigit()]
    vector_columns.sort(key=lambda c: int(c[1:]))
    return (
        frame["example_id"].astype(int).tolist(),
        frame["label"].tolist(),
        frame[vector_columns].to_numpy(dtype=np.float64),
    )
