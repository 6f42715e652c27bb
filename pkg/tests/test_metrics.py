import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fairgp.acceptance import METRIC_FIXTURES, _count_rates, _oracle_gap
from fairgp.metrics import (auc, delta_eo, delta_eo_multi, delta_sp, delta_sp_multi, evaluate,
                            normalized_ratio, proportion_table, sensitive_similarity)

from conftest import make_graph


class TestParity:
    def test_hand_example(self):
        assert delta_sp([1, 0, 1, 1], [0, 0, 1, 1]) == 0.5

    def test_all_positive(self):
        assert delta_sp([1] * 6, [0, 1] * 3) == 0.0

    def test_independent(self):
        assert delta_sp([1, 0, 1, 0], [0, 0, 1, 1]) == 0.0

    def test_empty_group_is_none(self):
        assert delta_sp([1, 0], [0, 0]) is None

    def test_mask(self):
        assert delta_sp([1, 0, 1, 1], [0, 0, 1, 1], mask=[True, False, True, False]) == 0.0


class TestOpportunity:
    def test_hand_example(self):
        assert delta_eo([1, 1, 0, 1], [1, 1, 1, 1], [0, 0, 1, 1]) == 0.5

    def test_perfect(self):
        y = np.array([1, 0, 1, 1, 0, 1])
        assert delta_eo(y, y, [0, 0, 0, 1, 1, 1]) == 0.0

    def test_constant_zero(self):
        assert delta_eo([0] * 4, [1, 0, 1, 1], [0, 0, 1, 1]) == 0.0

    def test_no_positives_none(self):
        assert delta_eo([1, 1, 0, 0], [1, 1, 0, 0], [0, 0, 1, 1]) is None


class TestOracle:
    @pytest.mark.parametrize("fixture", range(len(METRIC_FIXTURES)))
    def test_exhaustive(self, fixture):
        s, y = map(np.array, METRIC_FIXTURES[fixture])
        for code in range(256):
            pred = np.array([(code >> i) & 1 for i in range(8)])
            assert delta_sp(pred, s) == _oracle_gap(_count_rates(pred, s, [True] * 8))
            assert delta_eo(pred, y, s) == _oracle_gap(_count_rates(pred, s, y == 1))

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1), st.integers(0, 1)),
                    min_size=1, max_size=10))
    def test_bounds_and_symmetry(self, rows):
        pred, s, y = map(np.array, zip(*rows))
        for val, swapped in ((delta_sp(pred, s), delta_sp(pred, 1 - s)),
                             (delta_eo(pred, y, s), delta_eo(pred, y, 1 - s))):
            assert val == swapped
            assert val is None or 0.0 <= val <= 1.0


class TestMultiGroup:
    def test_variance_arithmetic(self):
        pred = [1, 0, 0, 0, 0, 1, 1, 0, 0, 0]
        s = [0] * 5 + [1] * 5
        assert math.isclose(delta_sp_multi(pred, s), 0.01, abs_tol=1e-15)

    def test_equal_rates(self):
        assert delta_sp_multi([1, 0, 1, 0, 1, 0], [0, 0, 1, 1, 2, 2]) == 0.0

    def test_two_groups_identity(self):
        rng = np.random.default_rng(0)
        pred, s = rng.integers(0, 2, 40), rng.integers(0, 2, 40)
        assert math.isclose(delta_sp_multi(pred, s), (delta_sp(pred, s) / 2) ** 2, abs_tol=1e-15)

    def test_eo_multi_missing_group(self):
        assert delta_eo_multi([1, 1, 1], [1, 1, 0], [0, 1, 2]) is None


class TestAUC:
    def test_separated(self):
        assert auc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0

    def test_inverted(self):
        assert auc([0.9, 0.8, 0.2, 0.1], [0, 0, 1, 1]) == 0.0

    def test_ties(self):
        assert auc([0.5] * 6, [0, 1] * 3) == 0.5

    def test_monotone_invariance(self):
        rng = np.random.default_rng(1)
        p, y = rng.random(50), rng.integers(0, 2, 50)
        assert auc(p, y) == auc(np.exp(3 * p) - 7, y)

    def test_single_class(self):
        with pytest.raises(ValueError):
            auc([0.1, 0.2], [1, 1])


class TestSimilarity:
    def test_identity(self):
        assert sensitive_similarity(np.eye(3), [1, 0, 1]) == 0.0

    def test_two_nodes(self):
        assert math.isclose(sensitive_similarity(np.full((2, 2), 0.5), [1, 0]), math.sqrt(0.5))

    def test_constant_s(self):
        A = np.random.default_rng(2).random((5, 5))
        A /= A.sum(axis=1, keepdims=True)
        assert sensitive_similarity(A, [1] * 5) == pytest.approx(0.0, abs=1e-15)

    def test_below_sqrt_n(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            A = rng.random((12, 12)) ** 4
            A /= A.sum(axis=1, keepdims=True)
            assert sensitive_similarity(A, rng.integers(0, 2, 12)) <= math.sqrt(12) + 1e-9


class TestProportions:
    def test_ratio(self):
        assert normalized_ratio(2, 1) == (2.0, 1.0)
        assert normalized_ratio(1, 3) == (1.0, 3.0)
        assert normalized_ratio(0, 3) is None

    def test_table(self):
        g = make_graph([(0, 1), (0, 2)], 3, sensitive=np.array([1, 1, 0]))
        t = proportion_table(g, [1, 0, 1], threshold=1)
        assert t.all_nodes == (2.0, 1.0)
        assert t.higher_order is None          # only node 0, no s=0 member
        assert t.prediction == (1.0, 2.0)
        assert t.majority("all_nodes") == 1 and t.majority("prediction") == 0

    def test_balanced(self):
        g = make_graph([], 4, sensitive=np.array([0, 1, 0, 1]))
        assert proportion_table(g, [0] * 4, 0).all_nodes == (1.0, 1.0)


class TestEvaluate:
    def test_nulls_kept(self):
        r = evaluate([0.2, 0.9], [0, 1], [0, 1], [0, 0])
        assert r.delta_sp is None and r.delta_eo is None and r.acc == 1.0
