import math
from dataclasses import replace

import numpy as np
import pytest

from fairgp.acceptance import gradient_check, gradient_instances
from fairgp.data import SyntheticConfig, generate_synthetic
from fairgp.graph import SplitMasks
from fairgp.model import (SGD, ModelInputs, ModelParams, PartitionConfig, TrainConfig,
                          TrainingDivergedError, binarize_labels, cross_entropy, init_params,
                          loss_and_grads, make_splits, predict, prepare_inputs, train)
from fairgp.partition import from_assignment

from conftest import make_graph


def two_node_graph():
    g = make_graph([(0, 1)], 2, features=np.array([[2.0, -1.0], [-2.0, 1.0]]),
                   labels=np.array([0, 1]))
    return g.with_masks(SplitMasks(np.array([True, True]), np.zeros(2, bool), np.zeros(2, bool)))


def small_synthetic(n=200, seed=0):
    g = generate_synthetic(SyntheticConfig(n=n, seed=seed))
    return g.with_masks(make_splits(g, seed))


class TestCrossEntropy:
    def test_saturated(self):
        assert cross_entropy([[20.0, -20.0]], [0]) == pytest.approx(0.0, abs=1e-15)

    def test_uniform(self):
        assert math.isclose(cross_entropy([[0.0, 0.0]], [1]), math.log(2))

    def test_nonnegative_and_stable(self):
        rng = np.random.default_rng(0)
        logits = rng.normal(scale=500, size=(30, 2))
        val = cross_entropy(logits, rng.integers(0, 2, 30))
        assert np.isfinite(val) and val >= 0

    def test_empty(self):
        with pytest.raises(ValueError):
            cross_entropy(np.zeros((0, 2)), [])


class TestGradients:
    def test_full_model(self):
        instances, _ = gradient_instances(6)
        for inst in instances:
            assert gradient_check(*inst) <= 1e-4

    def test_convex_toy_monotone(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(40, 3))
        y = (X[:, 0] + 0.3 * rng.normal(size=40) > 0).astype(int)
        params = ModelParams([], rng.normal(size=(3, 2)) * 0.1, np.zeros(2))
        inputs = ModelInputs(X, None, False, 1.0)
        opt = SGD(params.tensors(), lr=0.05)
        losses = []
        for _ in range(200):
            loss, grads = loss_and_grads(params, inputs, np.arange(40), y)
            losses.append(loss)
            opt.step(params.tensors(), grads)
        assert np.all(np.diff(losses) <= 1e-12)


class TestTrain:
    def test_two_node_separable(self):
        _, trace = train(two_node_graph(), TrainConfig(epochs=200, lr=1e-2))
        assert trace.train_acc[-1] == 1.0
        assert trace.loss[-1] < trace.loss[0]

    def test_same_seed_bitwise(self):
        g = small_synthetic()
        cfg = TrainConfig(epochs=5, seed=3)
        a = train(g, cfg, PartitionConfig(clusters=4))[1].loss[-1]
        b = train(g, cfg, PartitionConfig(clusters=4))[1].loss[-1]
        assert a == b

    def test_vanilla_reduction(self):
        g = small_synthetic()
        inputs = prepare_inputs(g, TrainConfig(no_fm=True, no_gp=True, no_ao=True))
        assert np.array_equal(inputs.X, g.features)
        assert inputs.partition is None and not inputs.masked
        assert len(inputs.blocks) == 1

    def test_no_ao_keeps_partition_unmasked(self):
        g = small_synthetic()
        inputs = prepare_inputs(g, TrainConfig(no_ao=True), PartitionConfig(clusters=4))
        assert inputs.partition is not None and not inputs.masked

    def test_all_ablations_run(self):
        g = small_synthetic()
        for bits in range(8):
            cfg = TrainConfig(epochs=2, no_fm=bool(bits & 1), no_gp=bool(bits & 2), no_ao=bool(bits & 4))
            _, trace = train(g, cfg, PartitionConfig(clusters=4))
            assert len(trace.loss) == 2

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence(self):
        with pytest.raises(TrainingDivergedError) as err:
            train(two_node_graph(), TrainConfig(epochs=50, lr=1e200, optimizer="sgd"))
        assert err.value.epoch >= 1

    def test_needs_masks(self):
        with pytest.raises(ValueError):
            train(make_graph([(0, 1)], 2), TrainConfig(epochs=1))

    def test_bad_config(self):
        with pytest.raises(ValueError):
            TrainConfig(lr=0)
        with pytest.raises(ValueError):
            TrainConfig(epochs=0)


class TestPredict:
    def test_probabilities(self):
        g = small_synthetic()
        params, trace = train(g, TrainConfig(epochs=3), PartitionConfig(clusters=4))
        prob, pred = predict(g, params, trace.inputs)
        assert np.all((prob >= 0) & (prob <= 1))
        np.testing.assert_array_equal(pred, (prob > 0.5).astype(int))

    def test_ties_to_zero(self):
        g = two_node_graph()
        params = init_params(2, 4)
        params.W_out[:] = 0.0
        _, pred = predict(g, params, ModelInputs(g.features, None, False, 2.0))
        np.testing.assert_array_equal(pred, [0, 0])

    def test_relabel_invariance(self):
        rng = np.random.default_rng(4)
        g = make_graph([], 12, features=rng.normal(size=(12, 3)))
        a = rng.integers(0, 3, 12)
        perm = rng.permutation(12)
        params = init_params(3, 4, rng=rng)
        p1, _ = predict(g, params, ModelInputs(g.features, from_assignment(a), True, 2.0))
        gp = make_graph([], 12, features=g.features[perm])
        p2, _ = predict(gp, params, ModelInputs(gp.features, from_assignment(a[perm]), True, 2.0))
        np.testing.assert_allclose(p2, p1[perm], atol=1e-12)


class TestSplits:
    def _graph(self, sizes):
        labels = np.repeat([0, 1], sizes)
        return make_graph([], labels.size, labels=labels)

    def test_large(self):
        g = self._graph([4000, 4000])
        m = make_splits(g, 0)
        for cls in (0, 1):
            sel = g.labels == cls
            assert (m.train[sel].sum(), m.val[sel].sum(), m.test[sel].sum()) == (1000, 1000, 1000)

    def test_small(self):
        g = self._graph([8, 8])
        m = make_splits(g, 0)
        for cls in (0, 1):
            sel = g.labels == cls
            assert (m.val[sel].sum(), m.test[sel].sum(), m.train[sel].sum()) == (2, 2, 4)

    def test_disjoint(self):
        m = make_splits(self._graph([37, 23]), 5)
        assert not np.any((m.train & m.val) | (m.train & m.test) | (m.val & m.test))

    def test_tiny_class(self):
        with pytest.raises(ValueError):
            make_splits(self._graph([10, 3]), 0)


class TestBinarize:
    def test_examples(self):
        np.testing.assert_array_equal(binarize_labels([0, 1, 2, 3]), [0, 1, 1, 1])
        np.testing.assert_array_equal(binarize_labels([0, 0]), [0, 0])
        np.testing.assert_array_equal(binarize_labels([1]), [1])

    def test_negative(self):
        with pytest.raises(ValueError):
            binarize_labels([0, -1])
