"""Windows Package - sliding-window (F, A, label) examples and their storage."""

from .builder import (
    build_adjacency,
    build_feature_matrix,
    make_examples,
    make_stream_examples,
    select_window_ips,
    window_count,
)
from .storage import read_examples, write_examples

__all__ = [
    "build_adjacency",
    "build_feature_matrix",
    "make_examples",
    "make_stream_examples",
    "select_window_ips",
    "window_count",
    "read_examples",
    "write_examples",
]
