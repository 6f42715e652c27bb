import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fairgp.acceptance import partition_problems
from fairgp.partition import (STRATEGIES, PartitionError, from_assignment, louvain_communities,
                              make_partition, partition_louvain, partition_multilevel,
                              partition_random, quality)

from conftest import er_graph, make_graph


def brute_force_balanced_cut(g, c=2):
    n = g.n
    best = None
    for code in range(2 ** n):
        a = np.array([(code >> i) & 1 for i in range(n)])
        if abs(a.sum() - n / 2) > 0:
            continue
        cut = quality(g, from_assignment(a, 2)).edge_cut if 0 < a.sum() < n else None
        if cut is not None and (best is None or cut < best):
            best = cut
    return best


class TestMultilevel:
    def test_bridge_fixture(self, two_triangles):
        p = partition_multilevel(two_triangles, 2, balance_eps=0.0)
        assert quality(two_triangles, p).edge_cut == 1 == brute_force_balanced_cut(two_triangles)

    def test_c1(self, two_triangles):
        p = partition_multilevel(two_triangles, 1)
        assert np.all(p.assignment == 0)
        assert quality(two_triangles, p).edge_cut == 0

    def test_c_equals_n(self, two_triangles):
        p = partition_multilevel(two_triangles, 6)
        assert sorted(p.sizes.tolist()) == [1] * 6
        assert quality(two_triangles, p).edge_cut == two_triangles.num_edges

    def test_refinement_monotone(self):
        g = er_graph(np.random.default_rng(0), 400, 0.02)
        p = partition_multilevel(g, 8, seed=3)
        assert p.history
        for _, _, before, after in p.history:
            assert after <= before

    def test_beats_random_on_er(self):
        ml, rnd = [], []
        for seed in range(20):
            g = er_graph(np.random.default_rng(seed), 200, 0.05)
            ml.append(quality(g, partition_multilevel(g, 4, seed=seed)).edge_cut)
            rnd.append(quality(g, partition_random(g, 4, seed=seed)).edge_cut)
        assert np.median(ml) <= np.median(rnd)

    def test_infeasible_flag(self):
        g = make_graph([], 10)
        p = partition_multilevel(g, 3, balance_eps=0.0)   # floor(10/3) < ceil(10/3)
        assert not p.balance_feasible
        assert p.sizes.max() <= 4

    def test_deterministic(self):
        g = er_graph(np.random.default_rng(5), 120, 0.05)
        a = partition_multilevel(g, 4, seed=9).assignment
        b = partition_multilevel(g, 4, seed=9).assignment
        np.testing.assert_array_equal(a, b)


class TestRandom:
    def test_sizes(self):
        p = partition_random(make_graph([], 5), 2)
        assert sorted(p.sizes.tolist()) == [2, 3]

    def test_singletons(self):
        p = partition_random(make_graph([], 4), 4)
        assert p.sizes.tolist() == [1, 1, 1, 1]

    def test_same_seed(self):
        g = make_graph([], 30)
        np.testing.assert_array_equal(partition_random(g, 4, seed=2).assignment,
                                      partition_random(g, 4, seed=2).assignment)


class TestLouvain:
    def test_two_k4(self, two_k4):
        p = partition_louvain(two_k4, 2)
        assert quality(two_k4, p).edge_cut == 0
        assert len({tuple(sorted(m)) for m in map(list, p.clusters())}) == 2

    def test_edgeless_singletons(self):
        g = make_graph([], 5)
        assert partition_louvain(g, 5).sizes.tolist() == [1] * 5

    def test_forced_merge(self, two_k4):
        p = partition_louvain(two_k4, 1)
        assert p.c == 1 and np.all(p.assignment == 0)

    def test_communities_cover(self, two_triangles):
        comm = louvain_communities(two_triangles)
        assert comm.shape == (6,)
        assert comm[0] == comm[1] == comm[2] and comm[3] == comm[4] == comm[5]


class TestQuality:
    def test_c1(self, path3):
        q = quality(path3, from_assignment([0, 0, 0]))
        assert (q.edge_cut, q.balance) == (0, 1.0)

    def test_k3_singletons(self):
        g = make_graph([(0, 1), (1, 2), (0, 2)], 3)
        assert quality(g, from_assignment([0, 1, 2])).edge_cut == 3

    def test_bridge_split(self, two_triangles):
        q = quality(two_triangles, from_assignment([0, 0, 0, 1, 1, 1]))
        assert (q.edge_cut, q.balance) == (1, 1.0)


class TestValidity:
    def test_empty_cluster_rejected(self):
        with pytest.raises(PartitionError):
            from_assignment([0, 0, 2], 3)

    def test_bad_c(self, path3):
        with pytest.raises(PartitionError):
            partition_multilevel(path3, 4)

    @settings(max_examples=80, deadline=None)
    @given(st.integers(2, 40), st.floats(0.0, 0.5), st.sampled_from(sorted(STRATEGIES)),
           st.integers(0, 10 ** 6), st.sampled_from([0.0, 0.05, 0.3]), st.data())
    def test_invariants(self, n, p, strategy, seed, eps, data):
        c = data.draw(st.integers(1, min(n, 8)))
        g = er_graph(np.random.default_rng(seed), n, p)
        part = make_partition(g, strategy, c, seed=seed, balance_eps=eps)
        assert partition_problems(part, n, c, strategy, eps) == []
