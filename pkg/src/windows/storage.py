"""
Example Storage

Flat binary container for examples:

    header:  b"STPX1" | gamma: uint32 | epsilon: uint32
    record:  label_len: uint32 | label: utf-8 | window_start: int64
             | F: gamma*epsilon float64, row-major | A: gamma*gamma uint8, row-major

All integers and floats are little-endian. Records run to end of file.
"""

import struct
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np

from src.errors import FormatError, MissingArtifactError, ShapeError
from src.models import Example

MAGIC = b"STPX1"
_HEADER = struct.Struct("<5sII")
_LABEL_LEN = struct.Struct("<I")
_START = struct.Struct("<q")


def write_examples(
    examples: Sequence[Example], path: Union[str, Path], gamma: int, epsilon: int
) -> Path:
    """Serialize examples; every example must match (gamma, epsilon)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, gamma, epsilon))
        for example in examples:
            if example.F.shape != (gamma, epsilon) or example.A.shape != (gamma, gamma):
                raise ShapeError(
                    f"Example shapes F{example.F.shape} A{example.A.shape} do not match "
                    f"gamma={gamma}, epsilon={epsilon}"
                )
            label = example.label.encode("utf-8")
            f.write(_LABEL_LEN.pack(len(label)))
            f.write(label)
            f.write(_START.pack(example.window_start))
            f.write(np.ascontiguousarray(example.F, dtype="<f8").tobytes())
            f.write(np.ascontiguousarray(example.A, dtype=np.uint8).tobytes())
    return path


def read_examples(path: Union[str, Path]) -> Tuple[List[Example], int, int]:
    """
    Load an example file.

    Returns:
        (examples, gamma, epsilon)

    Raises:
        FormatError: wrong magic or truncated record
    """
    path = Path(path)
    if not path.is_file():
        raise MissingArtifactError(f"Example file not found: {path}", path=str(path))
    buffer = path.read_bytes()
    if len(buffer) < _HEADER.size:
        raise FormatError(f"Example file too short for header: {path}")
    magic, gamma, epsilon = _HEADER.unpack_from(buffer, 0)
    if magic != MAGIC:
        raise FormatError(f"Bad magic {magic!r} in {path}; expected {MAGIC!r}")

    f_bytes = gamma * epsilon * 8
    a_bytes = gamma * gamma
    offset = _HEADER.size
    examples: List[Example] = []
    while offset < len(buffer):
        try:
            (label_len,) = _LABEL_LEN.unpack_from(buffer, offset)
            offset += _LABEL_LEN.size
            end = offset + label_len + _START.size + f_bytes + a_bytes
            if end > len(buffer):
                raise FormatError(f"Truncated example record at byte {offset} in {path}")
            try:
                label = buffer[offset:offset + label_len].decode("utf-8")
            except UnicodeDecodeError as exc:
                raise FormatError(f"Example label at byte {offset} in {path} is not UTF-8") from exc
            offset += label_len
            (window_start,) = _START.unpack_from(buffer, offset)
            offset += _START.size
        except struct.error as exc:
            raise FormatError(f"Truncated example record at byte {offset} in {path}") from exc
        F = np.frombuffer(buffer, dtype="<f8", count=gamma * epsilon, offset=offset)
        offset += f_bytes
        A = np.frombuffer(buffer, dtype=np.uint8, count=gamma * gamma, offset=offset)
        offset += a_bytes
        examples.append(
            Example(
                F=F.reshape(gamma, epsilon).astype(np.float64),
                A=A.reshape(gamma, gamma).copy(),
                label=label,
                window_start=int(window_start),
            )
        )
    return examples, int(gamma), int(epsilon)
