"""
Connection Graph

Directed multigraph over IP addresses. Each flow becomes one edge weighted by

    weight = (src_bytes - dst_bytes) / alpha ** duration

Parallel edges are kept. Node indices follow first appearance in flow order,
source before destination within a flow.
"""

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Tuple, Union

import numpy as np
import pandas as pd
import scipy.sparse as sp

from src.errors import BoundsError, MissingArtifactError, SchemaError
from src.models import EdgeWeightParams, FlowDataset, FlowRecord
from src.utils import get_logger

logger = get_logger(__name__)

GRAPH_COLUMNS = ("src_ip", "dst_ip", "weight", "timestamp_us")


@dataclass(frozen=True)
class ConnectionGraph:
    """Immutable directed multigraph; edges are parallel arrays."""

    nodes: Tuple[str, ...]
    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray
    timestamp: np.ndarray
    index: Dict[str, int] = field(default_factory=dict, compare=False)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_edges(self) -> int:
        return int(self.src.shape[0])

    def node_index(self, ip: str) -> int:
        """Index of an IP, or -1 if it is not a node."""
        return self.index.get(ip, -1)

    def edges(self) -> Iterable[Tuple[int, int, float, int]]:
        """Yield (src_index, dst_index, weight, timestamp) in build order."""
        for i in range(self.n_edges):
            yield int(self.src[i]), int(self.dst[i]), float(self.weight[i]), int(self.timestamp[i])


def edge_weight(flow: FlowRecord, params: EdgeWeightParams) -> float:
    """
    Weight of one flow edge.

    Computed as a decay factor exp(-duration * ln(alpha)) so very long flows
    underflow to zero instead of overflowing alpha ** duration.
    """
    decay = math.exp(-flow.duration * math.log(params.alpha))
    return (flow.src_bytes - flow.dst_bytes) * decay


def _assemble(
    ips: List[Tuple[str, str]], weights: List[float], timestamps: List[int]
) -> ConnectionGraph:
    index: Dict[str, int] = {}
    src = np.empty(len(ips), dtype=np.int64)
    dst = np.empty(len(ips), dtype=np.int64)
    for i, (src_ip, dst_ip) in enumerate(ips):
        src[i] = index.setdefault(src_ip, len(index))
        dst[i] = index.setdefault(dst_ip, len(index))
    return ConnectionGraph(
        nodes=tuple(index),
        src=src,
        dst=dst,
        weight=np.asarray(weights, dtype=np.float64),
        timestamp=np.asarray(timestamps, dtype=np.int64),
        index=index,
    )


def build_graph(dataset: FlowDataset, params: EdgeWeightParams) -> ConnectionGraph:
    """
    Build the connection graph of a sorted dataset.

    An empty dataset yields an empty graph.
    """
    records = dataset.records
    graph = _assemble(
        [(record.src_ip, record.dst_ip) for record in records],
        [edge_weight(record, params) for record in records],
        [record.timestamp for record in records],
    )
    logger.info("graph_built", nodes=graph.n_nodes, edges=graph.n_edges, alpha=params.alpha)
    return graph


def neighbors(graph: ConnectionGraph, node: int) -> List[Tuple[int, float]]:
    """
    Undirected neighborhood of a node with aggregate edge magnitude.

    The neighborhood is the union of in- and out-neighbors. The aggregate
    weight of a pair is the sum of |weight| over every parallel edge between
    them in either direction; a self-loop makes the node its own neighbor.

    Returns:
        (neighbor index, aggregate weight) pairs sorted by neighbor index

    Raises:
        BoundsError: node is not a valid index
    """
    if not 0 <= node < graph.n_nodes:
        raise BoundsError(
            f"Node index {node} out of range for graph with {graph.n_nodes} nodes",
            node=node,
            n_nodes=graph.n_nodes,
        )
    mask = (graph.src == node) | (graph.dst == node)
    totals: Dict[int, float] = {}
    for s, d, w in zip(graph.src[mask], graph.dst[mask], graph.weight[mask]):
        other = int(d) if s == node else int(s)
        totals[other] = totals.get(other, 0.0) + abs(float(w))
    return sorted(totals.items())


def aggregate_weights(graph: ConnectionGraph) -> sp.csr_matrix:
    """
    Symmetric n x n matrix of aggregate |weight| per node pair.

    Row i holds exactly the pairs `neighbors(graph, i)` reports.
    """
    n = graph.n_nodes
    magnitude = np.abs(graph.weight)
    loops = graph.src == graph.dst
    rows = np.concatenate([graph.src, graph.dst[~loops]])
    cols = np.concatenate([graph.dst, graph.src[~loops]])
    data = np.concatenate([magnitude, magnitude[~loops]])
    matrix = sp.coo_matrix((data, (rows, cols)), shape=(n, n)).tocsr()
    matrix.sum_duplicates()
    return matrix


def transition_matrix(graph: ConnectionGraph) -> sp.csr_matrix:
    """
    Row-normalized aggregate weights.

    Rows whose aggregate weight is zero (isolated nodes, or nodes whose every
    edge carries zero weight) stay all-zero.
    """
    weights = aggregate_weights(graph)
    row_sums = np.asarray(weights.sum(axis=1)).ravel()
    inverse = np.zeros_like(row_sums)
    nonzero = row_sums > 0
    inverse[nonzero] = 1.0 / row_sums[nonzero]
    return sp.diags(inverse).dot(weights).tocsr()


# =============================================================================
# Graph dump
# =============================================================================

def write_graph_csv(graph: ConnectionGraph, path: Union[str, Path]) -> Path:
    """Write edges as `src_ip,dst_ip,weight,timestamp_us` in build order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(
        {
            "src_ip": [graph.nodes[i] for i in graph.src],
            "dst_ip": [graph.nodes[i] for i in graph.dst],
            "weight": [repr(float(w)) for w in graph.weight],
            "timestamp_us": graph.timestamp,
        },
        columns=list(GRAPH_COLUMNS),
    )
    frame.to_csv(path, index=False, lineterminator="\n")
    return path


def read_graph_csv(path: Union[str, Path]) -> ConnectionGraph:
    """
    Reload a graph dump.

    Node order is reconstructed from edge order, which reproduces the indexing
    of the graph that was dumped.
    """
    path = Path(path)
    if not path.is_file():
        raise MissingArtifactError(f"Graph file not found: {path}", path=str(path))
    frame = pd.read_csv(
        path,
        dtype={"src_ip": str, "dst_ip": str, "weight": np.float64, "timestamp_us": np.int64},
        float_precision="round_trip",
        keep_default_na=False,
    )
    for column in GRAPH_COLUMNS:
        if column not in frame.columns:
            raise SchemaError(f"Missing column '{column}' in graph file", column=column)
    return _assemble(
        list(zip(frame["src_ip"], frame["dst_ip"])),
        frame["weight"].tolist(),
        frame["timestamp_us"].tolist(),
    )
