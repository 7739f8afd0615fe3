"""
FastRP Node Embeddings

Very sparse random projection embeddings over the connection graph:

    final(n) = w_0 * l2(init_n) + sum_{i=1..d} w_i * l2(P^i init)_n

where P is the row-normalized aggregate |weight| matrix. Each intermediate is
normalized, then weighted. Propagated terms that vanish (isolated nodes)
contribute zero.
"""

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
import scipy.sparse as sp
from sklearn.preprocessing import normalize

from src.errors import (
    ConfigError,
    MissingArtifactError,
    NonFiniteError,
    PreconditionError,
    SchemaError,
    ZeroVectorError,
)
from src.models import EdgeWeightParams, FastRPConfig, FlowDataset
from src.utils import get_logger

from .connection_graph import ConnectionGraph, build_graph, transition_matrix

logger = get_logger(__name__)


@dataclass(frozen=True)
class NodeEmbeddingTable:
    """
    One epsilon-dimensional vector per graph node.

    Row i is node i. `ips` names the rows when the table belongs to a graph
    built from flows; it is empty for index-only tables.
    """

    vectors: np.ndarray
    ips: Tuple[str, ...] = ()
    index: Dict[str, int] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        if self.vectors.ndim != 2:
            raise ConfigError(f"Embedding table must be 2-D, got shape {self.vectors.shape}")
        if not np.all(np.isfinite(self.vectors)):
            raise NonFiniteError("Embedding table contains non-finite entries")
        if self.ips and len(self.ips) != self.vectors.shape[0]:
            raise ConfigError(
                f"{len(self.ips)} IPs for {self.vectors.shape[0]} embedding rows"
            )
        if self.ips and not self.index:
            object.__setattr__(self, "index", {ip: i for i, ip in enumerate(self.ips)})

    @property
    def epsilon(self) -> int:
        return int(self.vectors.shape[1])

    def __len__(self) -> int:
        return int(self.vectors.shape[0])

    def lookup(self, ip: str) -> Optional[np.ndarray]:
        """Vector for an IP, or None when the IP is unknown."""
        row = self.index.get(ip)
        return None if row is None else self.vectors[row]


# =============================================================================
# Stages
# =============================================================================

def _draw_row(seed: int, node: int, epsilon: int, sparsity: float) -> np.ndarray:
    half = 1.0 / (2.0 * sparsity)
    magnitude = math.sqrt(sparsity)
    salt = 0
    while True:
        rng = np.random.default_rng([seed, node, salt])
        u = rng.random(epsilon)
        row = np.zeros(epsilon, dtype=np.float64)
        row[u < half] = magnitude
        row[(u >= half) & (u < 2.0 * half)] = -magnitude
        if row.any():
            return row
        salt += 1


def init_random_vectors(n_nodes: int, cfg: FastRPConfig) -> NodeEmbeddingTable:
    """
    Draw the very sparse initial vectors.

    Entries are +sqrt(s) with probability 1/(2s), -sqrt(s) with probability
    1/(2s) and 0 otherwise. Each row depends only on (seed, node index, salt);
    an all-zero row is redrawn with the next salt.
    """
    if n_nodes < 1:
        raise PreconditionError(f"Need at least one node, got {n_nodes}", n_nodes=n_nodes)
    vectors = np.vstack(
        [_draw_row(cfg.seed, node, cfg.epsilon, cfg.sparsity_s) for node in range(n_nodes)]
    )
    return NodeEmbeddingTable(vectors=vectors)


def l2_normalize(vector: np.ndarray) -> np.ndarray:
    """
    Scale a vector to unit L2 norm.

    Raises:
        ZeroVectorError: the vector has zero norm
    """
    vector = np.asarray(vector, dtype=np.float64)
    norm = float(np.linalg.norm(vector))
    if norm == 0.0:
        raise ZeroVectorError("Cannot normalize a zero vector")
    return vector / norm


def propagate(
    graph: ConnectionGraph,
    table: NodeEmbeddingTable,
    weights: Optional[sp.csr_matrix] = None,
) -> NodeEmbeddingTable:
    """
    One averaging step over weighted neighborhoods.

    Args:
        graph: Connection graph
        table: Current vectors, one row per graph node
        weights: Row-normalized transition matrix; derived from the graph when omitted

    Returns:
        Table whose row n is the |weight|-weighted mean of n's neighbors' rows.
        Nodes without weighted neighbors get a zero row.
    """
    if len(table) != graph.n_nodes:
        raise ConfigError(
            f"Table has {len(table)} rows but graph has {graph.n_nodes} nodes"
        )
    if weights is None:
        weights = transition_matrix(graph)
    return NodeEmbeddingTable(vectors=np.asarray(weights @ table.vectors), ips=table.ips)


def embed_nodes(graph: ConnectionGraph, cfg: FastRPConfig) -> NodeEmbeddingTable:
    """
    Final FastRP embedding of every node.

    Raises:
        PreconditionError: the graph has no nodes
    """
    if graph.n_nodes == 0:
        raise PreconditionError("Cannot embed an empty graph")

    initial = init_random_vectors(graph.n_nodes, cfg)
    transition = transition_matrix(graph)

    final = cfg.iteration_weights[0] * normalize(initial.vectors, norm="l2")
    current = initial
    for weight in cfg.iteration_weights[1:]:
        current = propagate(graph, current, transition)
        # zero rows stay zero under sklearn's normalize
        final = final + weight * normalize(current.vectors, norm="l2")

    table = NodeEmbeddingTable(vectors=final, ips=graph.nodes)
    logger.info(
        "nodes_embedded",
        nodes=len(table),
        epsilon=cfg.epsilon,
        degree=cfg.degree,
        sparsity=cfg.sparsity_s,
    )
    return table


def embed_unknown_ips(
    dataset: FlowDataset,
    table: NodeEmbeddingTable,
    cfg: FastRPConfig,
    params: EdgeWeightParams,
) -> Tuple[NodeEmbeddingTable, List[str]]:
    """
    Extend a table with IPs first seen at inference.

    The new flows get their own graph and FastRP run; only rows for IPs missing
    from `table` are taken from it, known IPs keep their stored vectors.

    Returns:
        (extended table, list of IPs that were added)
    """
    graph = build_graph(dataset, params)
    unknown = [ip for ip in graph.nodes if table.lookup(ip) is None]
    if not unknown:
        return table, []
    fresh = embed_nodes(graph, cfg)
    rows = np.vstack([fresh.vectors[fresh.index[ip]] for ip in unknown])
    extended = NodeEmbeddingTable(
        vectors=np.vstack([table.vectors, rows]),
        ips=tuple(table.ips) + tuple(unknown),
    )
    logger.warning("unknown_ips_embedded", count=len(unknown))
    return extended, unknown


# =============================================================================
# Table dump
# =============================================================================

def write_embedding_csv(table: NodeEmbeddingTable, path: Union[str, Path]) -> Path:
    """Write `ip,e0,...,e{eps-1}`."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    columns = [f"e{i}" for i in range(table.epsilon)]
    frame = pd.DataFrame(table.vectors, columns=columns)
    ips = table.ips or tuple(str(i) for i in range(len(table)))
    frame.insert(0, "ip", list(ips))
    frame.to_csv(path, index=False, lineterminator="\n")
    return path


def read_embedding_csv(path: Union[str, Path]) -> NodeEmbeddingTable:
    """Reload a table written by write_embedding_csv."""
    path = Path(path)
    if not path.is_file():
        raise MissingArtifactError(f"Embedding file not found: {path}", path=str(path))
    frame = pd.read_csv(
        path, dtype={"ip": str}, float_precision="round_trip", keep_default_na=False
    )
    if "ip" not in frame.columns:
        raise SchemaError("Missing column 'ip' in embedding file", column="ip")
    value_columns = [column for column in frame.columns if column != "ip"]
    vectors = frame[value_columns].to_numpy(dtype=np.float64)
    return NodeEmbeddingTable(vectors=vectors, ips=tuple(frame["ip"]))
