import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fairgp.graph import (GraphError, SplitMasks, build_graph, default_degree_threshold, degree,
                          higher_order_nodes)

from conftest import make_graph


class TestBuildGraph:
    def test_dedup_and_self_loops(self):
        g = make_graph([(0, 1), (1, 0), (1, 1)], 2)
        assert g.num_edges == 1
        np.testing.assert_array_equal(g.neighbors(0), [1])
        np.testing.assert_array_equal(g.neighbors(1), [0])

    def test_isolated(self):
        g = make_graph([], 3)
        np.testing.assert_array_equal(g.degrees, [0, 0, 0])

    def test_path_degrees(self, path3):
        np.testing.assert_array_equal(path3.degrees, [1, 2, 1])

    def test_rejects_weighted(self):
        with pytest.raises(GraphError):
            build_graph([(0, 1, 0.5)], np.zeros((2, 1)), [0, 0], [0, 0])

    def test_rejects_out_of_range(self):
        with pytest.raises(GraphError):
            make_graph([(0, 5)], 3)

    def test_rejects_length_mismatch(self):
        with pytest.raises(GraphError):
            build_graph([(0, 1)], np.zeros((2, 1)), [0], [0, 0])

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 30).flatmap(
        lambda n: st.tuples(st.just(n), st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)),
                                                 max_size=80))))
    def test_symmetric_sorted(self, case):
        n, edges = case
        g = make_graph(edges, n)
        A = g.adjacency().toarray()
        np.testing.assert_array_equal(A, A.T)
        assert np.all(np.diag(A) == 0)
        for v in range(n):
            nb = g.neighbors(v)
            assert np.all(np.diff(nb) > 0)
        assert g.degrees.sum() == 2 * g.num_edges
        want = {tuple(sorted(e)) for e in edges if e[0] != e[1]}
        assert {tuple(e) for e in g.edge_array().tolist()} == want


class TestDegree:
    def test_path(self, path3):
        assert degree(path3, 1) == 2

    def test_isolated(self):
        assert degree(make_graph([], 2), 0) == 0

    def test_k4(self):
        g = make_graph([(u, v) for u in range(4) for v in range(u + 1, 4)], 4)
        assert all(degree(g, v) == 3 for v in range(4))

    def test_bad_node(self, path3):
        with pytest.raises(GraphError):
            degree(path3, 7)


class TestHigherOrder:
    def test_star(self):
        g = make_graph([(0, k) for k in range(1, 6)], 6)
        np.testing.assert_array_equal(higher_order_nodes(g, 4), [0])

    def test_isolated_threshold_zero(self):
        assert higher_order_nodes(make_graph([], 4), 0).size == 0

    def test_strict_at_max(self, path3):
        assert higher_order_nodes(path3, 2).size == 0

    def test_default_threshold_is_quantile(self):
        g = make_graph([(0, k) for k in range(1, 10)], 10)
        assert default_degree_threshold(g) == np.quantile(g.degrees, 0.9)


class TestMasks:
    def test_overlap_rejected(self):
        a = np.array([True, False])
        with pytest.raises(ValueError):
            SplitMasks(a, a, ~a)

    def test_relabel_roundtrip(self, two_triangles):
        perm = np.array([5, 3, 1, 0, 2, 4])
        g = two_triangles.relabel(perm)
        assert g.num_edges == two_triangles.num_edges
        np.testing.assert_array_equal(np.sort(g.degrees), np.sort(two_triangles.degrees))
