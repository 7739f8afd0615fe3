"""
Unit Tests for the Connection Graph

Tests edge weights, graph construction, neighborhoods and the graph dump.
"""

import numpy as np
import pytest

from src.errors import BoundsError
from src.graph import (
    aggregate_weights,
    build_graph,
    edge_weight,
    neighbors,
    read_graph_csv,
    transition_matrix,
    write_graph_csv,
)
from src.models import EdgeWeightParams, FlowDataset, FlowRecord

ALPHA = EdgeWeightParams(alpha=1.15)


def flow(src, dst, src_bytes=100, dst_bytes=0, duration=0.0, timestamp=0):
    return FlowRecord(
        timestamp=timestamp,
        src_ip=src,
        dst_ip=dst,
        src_port=1234,
        dst_port=80,
        duration=duration,
        src_bytes=src_bytes,
        dst_bytes=dst_bytes,
        label="x",
    )


def dataset(*flows):
    return FlowDataset(records=tuple(flows))


class TestEdgeWeight:
    """Tests for the decayed byte-difference weight."""

    def test_zero_duration(self):
        """Test that zero duration leaves the byte difference unscaled."""
        assert edge_weight(flow("10.0.0.1", "10.0.0.2", 1500, 500), ALPHA) == pytest.approx(1000.0)

    def test_symmetric_bytes(self):
        """Test that equal byte counts give zero weight for any duration."""
        assert edge_weight(flow("10.0.0.1", "10.0.0.2", 1000, 1000, duration=7.5), ALPHA) == 0.0

    def test_decay_value(self):
        """Test 1150 bytes decayed over 10 seconds."""
        weight = edge_weight(flow("10.0.0.1", "10.0.0.2", 2000, 850, duration=10), ALPHA)

        assert weight == pytest.approx(1150 / 1.15**10, rel=1e-12)
        assert weight == pytest.approx(284.26, abs=0.01)

    def test_antisymmetry(self):
        """Test that swapping byte counts negates the weight."""
        forward = edge_weight(flow("10.0.0.1", "10.0.0.2", 900, 300, duration=2.0), ALPHA)
        backward = edge_weight(flow("10.0.0.1", "10.0.0.2", 300, 900, duration=2.0), ALPHA)

        assert backward == pytest.approx(-forward)

    def test_monotone_in_duration_and_alpha(self):
        """Test that weight decreases with duration and with alpha."""
        durations = [edge_weight(flow("10.0.0.1", "10.0.0.2", 900, 300, duration=d), ALPHA)
                     for d in (0.0, 1.0, 5.0, 20.0)]
        alphas = [edge_weight(flow("10.0.0.1", "10.0.0.2", 900, 300, duration=3.0),
                              EdgeWeightParams(alpha=a)) for a in (1.05, 1.15, 2.0)]

        assert durations == sorted(durations, reverse=True)
        assert len(set(durations)) == 4
        assert alphas == sorted(alphas, reverse=True)

    def test_alpha_must_exceed_one(self):
        """Test that alpha <= 1 is rejected."""
        with pytest.raises(ValueError):
            EdgeWeightParams(alpha=1.0)


class TestBuildGraph:
    """Tests for build_graph."""

    def test_single_flow(self):
        """Test that one flow gives two nodes and one edge."""
        graph = build_graph(dataset(flow("10.0.0.1", "10.0.0.2")), ALPHA)

        assert graph.nodes == ("10.0.0.1", "10.0.0.2")
        assert graph.n_edges == 1

    def test_parallel_edges_kept(self):
        """Test that identical flows become parallel edges."""
        graph = build_graph(
            dataset(flow("10.0.0.1", "10.0.0.2"), flow("10.0.0.1", "10.0.0.2")), ALPHA
        )

        assert graph.n_nodes == 2
        assert graph.n_edges == 2

    def test_first_appearance_indexing(self):
        """Test that node indices follow first appearance, source first."""
        graph = build_graph(
            dataset(flow("10.0.0.5", "10.0.0.3"), flow("10.0.0.3", "10.0.0.9")), ALPHA
        )

        assert graph.nodes == ("10.0.0.5", "10.0.0.3", "10.0.0.9")
        assert graph.node_index("10.0.0.9") == 2
        assert graph.node_index("192.0.2.1") == -1
        assert [(s, d) for s, d, _, _ in graph.edges()] == [(0, 1), (1, 2)]

    def test_empty_dataset(self):
        """Test that an empty dataset builds an empty graph."""
        graph = build_graph(FlowDataset(), ALPHA)

        assert graph.n_nodes == 0
        assert graph.n_edges == 0


class TestNeighbors:
    """Tests for neighborhoods and transition weights."""

    def test_both_directions_sum_magnitudes(self):
        """Test that a->b weight 5 and b->a weight -3 aggregate to 8."""
        graph = build_graph(
            dataset(
                flow("10.0.0.1", "10.0.0.2", src_bytes=5, dst_bytes=0),
                flow("10.0.0.2", "10.0.0.1", src_bytes=0, dst_bytes=3),
            ),
            ALPHA,
        )

        assert neighbors(graph, 0) == [(1, pytest.approx(8.0))]
        assert neighbors(graph, 1) == [(0, pytest.approx(8.0))]

    def test_parallel_edges_sum(self):
        """Test that two parallel edges of weight 2 aggregate to 4."""
        graph = build_graph(
            dataset(
                flow("10.0.0.1", "10.0.0.2", src_bytes=2),
                flow("10.0.0.1", "10.0.0.2", src_bytes=2),
            ),
            ALPHA,
        )

        assert neighbors(graph, 0) == [(1, pytest.approx(4.0))]

    def test_invalid_index(self):
        """Test that an out-of-range node raises a bounds error."""
        graph = build_graph(dataset(flow("10.0.0.1", "10.0.0.2")), ALPHA)

        with pytest.raises(BoundsError):
            neighbors(graph, 2)
        with pytest.raises(BoundsError):
            neighbors(graph, -1)

    def test_aggregate_matrix_matches_neighbors(self):
        """Test that aggregate_weights rows agree with neighbors()."""
        graph = build_graph(
            dataset(
                flow("10.0.0.1", "10.0.0.2", src_bytes=7),
                flow("10.0.0.2", "10.0.0.3", src_bytes=1, dst_bytes=4),
                flow("10.0.0.3", "10.0.0.3", src_bytes=2),
            ),
            ALPHA,
        )
        dense = aggregate_weights(graph).toarray()

        for node in range(graph.n_nodes):
            row = {j: dense[node, j] for j in np.flatnonzero(dense[node])}
            assert {j: pytest.approx(w) for j, w in neighbors(graph, node)} == row

    def test_transition_rows_sum_to_one(self):
        """Test that transition rows sum to one and zero-weight nodes stay zero."""
        graph = build_graph(
            dataset(
                flow("10.0.0.1", "10.0.0.2", src_bytes=10),
                flow("10.0.0.1", "10.0.0.3", src_bytes=30),
                flow("10.0.0.4", "10.0.0.5", src_bytes=50, dst_bytes=50),
            ),
            ALPHA,
        )
        dense = transition_matrix(graph).toarray()

        np.testing.assert_allclose(dense[0], [0.0, 0.25, 0.75, 0.0, 0.0])
        np.testing.assert_allclose(dense.sum(axis=1), [1.0, 1.0, 1.0, 0.0, 0.0])


class TestGraphCsv:
    """Tests for the graph dump."""

    def test_reload_reproduces_graph(self, tmp_path):
        """Test that a dumped graph reloads with the same nodes and edges."""
        graph = build_graph(
            dataset(
                flow("10.0.0.1", "10.0.0.2", src_bytes=2000, dst_bytes=850, duration=10),
                flow("10.0.0.2", "10.0.0.3", src_bytes=1, dst_bytes=9, timestamp=5),
            ),
            ALPHA,
        )
        path = write_graph_csv(graph, tmp_path / "graph.csv")

        reloaded = read_graph_csv(path)

        assert path.read_text().splitlines()[0] == "src_ip,dst_ip,weight,timestamp_us"
        assert reloaded.nodes == graph.nodes
        np.testing.assert_array_equal(reloaded.src, graph.src)
        np.testing.assert_array_equal(reloaded.dst, graph.dst)
        np.testing.assert_array_equal(reloaded.weight, graph.weight)
        np.testing.assert_array_equal(reloaded.timestamp, graph.timestamp)
