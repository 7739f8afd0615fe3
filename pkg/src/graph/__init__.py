"""Graph Package - connection graph construction and FastRP node embeddings."""

from .connection_graph import (
    ConnectionGraph,
    aggregate_weights,
    build_graph,
    edge_weight,
    neighbors,
    read_graph_csv,
    transition_matrix,
    write_graph_csv,
)
from .fastrp import (
    NodeEmbeddingTable,
    embed_nodes,
    embed_unknown_ips,
    init_random_vectors,
    l2_normalize,
    propagate,
    read_embedding_csv,
    write_embedding_csv,
)

__all__ = [
    "ConnectionGraph",
    "aggregate_weights",
    "build_graph",
    "edge_weight",
    "neighbors",
    "read_graph_csv",
    "transition_matrix",
    "write_graph_csv",
    "NodeEmbeddingTable",
    "embed_nodes",
    "embed_unknown_ips",
    "init_random_vectors",
    "l2_normalize",
    "propagate",
    "read_embedding_csv",
    "write_embedding_csv",
]
