"""
Spatio-Temporal Example Builder

Slides a window of beta flows over each class stream. Within a window the
first gamma distinct IPs (source before destination, in flow order) select
the rows of F (their node embeddings) and the rows/columns of the binary
adjacency matrix A. Rows past the selected IPs are zero padding.
"""

from typing import Dict, List, Sequence

import numpy as np

from src.errors import ConfigError
from src.models import Example, FlowDataset, FlowRecord, WindowConfig
from src.utils import get_logger

from src.graph.fastrp import NodeEmbeddingTable

logger = get_logger(__name__)


def select_window_ips(flows: Sequence[FlowRecord], gamma: int) -> List[str]:
    """First gamma distinct IPs in appearance order."""
    selected: Dict[str, None] = {}
    for flow in flows:
        for ip in (flow.src_ip, flow.dst_ip):
            if len(selected) >= gamma:
                return list(selected)
            selected.setdefault(ip, None)
    return list(selected)


def build_feature_matrix(
    ips: Sequence[str], table: NodeEmbeddingTable, gamma: int, epsilon: int
) -> np.ndarray:
    """
    Stack node embeddings into a (gamma, epsilon) matrix.

    Row k is the embedding of ips[k]; IPs absent from the table and rows past
    len(ips) are zero.

    Raises:
        ConfigError: table dimension differs from epsilon
    """
    if table.epsilon != epsilon:
        raise ConfigError(
            f"Embedding table has dimension {table.epsilon}, window config expects {epsilon}",
            table_epsilon=table.epsilon,
            epsilon=epsilon,
        )
    F = np.zeros((gamma, epsilon), dtype=np.float64)
    for row, ip in enumerate(ips[:gamma]):
        vector = table.lookup(ip)
        if vector is not None:
            F[row] = vector
    return F


def build_adjacency(flows: Sequence[FlowRecord], ips: Sequence[str], gamma: int) -> np.ndarray:
    """
    Directed binary adjacency over the selected IPs.

    A[i, j] = 1 iff some flow goes from ips[i] to ips[j]. Flows touching an
    unselected IP are ignored.
    """
    position = {ip: k for k, ip in enumerate(ips[:gamma])}
    A = np.zeros((gamma, gamma), dtype=np.uint8)
    for flow in flows:
        i = position.get(flow.src_ip)
        j = position.get(flow.dst_ip)
        if i is not None and j is not None:
            A[i, j] = 1
    return A


def window_count(n_flows: int, beta: int, stride: int) -> int:
    """Number of full windows: floor((N - beta) / stride) + 1, or 0 if N < beta."""
    if n_flows < beta:
        return 0
    return (n_flows - beta) // stride + 1


def make_stream_examples(
    flows: Sequence[FlowRecord], label: str, table: NodeEmbeddingTable, cfg: WindowConfig
) -> List[Example]:
    """Examples of a single execution stream, ordered by window start."""
    examples = []
    for w in range(window_count(len(flows), cfg.beta, cfg.stride)):
        start = w * cfg.stride
        window = flows[start:start + cfg.beta]
        ips = select_window_ips(window, cfg.gamma)
        unknown = sum(1 for ip in ips if table.lookup(ip) is None)
        examples.append(
            Example(
                F=build_feature_matrix(ips, table, cfg.gamma, cfg.epsilon),
                A=build_adjacency(window, ips, cfg.gamma),
                label=label,
                window_start=start,
                unknown_ips=unknown,
            )
        )
    return examples


def make_examples(
    dataset: FlowDataset, table: NodeEmbeddingTable, cfg: WindowConfig
) -> List[Example]:
    """
    Window every class stream of a sorted dataset.

    Windows never cross a class boundary and a trailing partial window is
    dropped. Output is ordered by label, then window start.
    """
    examples: List[Example] = []
    short_streams = []
    for label, stream in dataset.by_class().items():
        stream_examples = make_stream_examples(stream.records, label, table, cfg)
        if not stream_examples:
            short_streams.append((label, len(stream)))
        examples.extend(stream_examples)

    for label, size in short_streams:
        logger.warning("stream_too_short", label=label, flows=size, beta=cfg.beta)
    unknown = sum(example.unknown_ips for example in examples)
    if unknown:
        logger.warning("unknown_ips_zero_filled", rows=unknown)
    logger.info(
        "examples_built",
        examples=len(examples),
        classes=len({example.label for example in examples}),
        short_streams=len(short_streams),
        beta=cfg.beta,
        gamma=cfg.gamma,
        stride=cfg.stride,
    )
    return examples
