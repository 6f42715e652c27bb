"""The twelve acceptance criteria at their stated tolerances.

Each test records a one-line PASS/FAIL summary, repeated at the end of the
pytest run.
"""

import pytest

from fairgp import acceptance as acc

pytestmark = pytest.mark.acceptance


def check(record, result):
    record(result)
    assert result.passed, result.line()


def test_01_cross_group_mass_bound(record_criterion):
    check(record_criterion, acc.criterion_theorem1())


def test_02_sqrt_n_bound(record_criterion):
    check(record_criterion, acc.criterion_lemma1())


def test_03_partition_approximation_bound(record_criterion):
    check(record_criterion, acc.criterion_theorem2())


def test_04_gradient_check(record_criterion):
    check(record_criterion, acc.criterion_gradients())


def test_05_metric_oracle(record_criterion):
    check(record_criterion, acc.criterion_metric_oracle())


def test_06_partition_validity(record_criterion):
    check(record_criterion, acc.criterion_partition_validity())


def test_07_partition_quality(record_criterion):
    check(record_criterion, acc.criterion_partition_quality())


def test_08_eigen_oracle(record_criterion):
    check(record_criterion, acc.criterion_eigen_oracle())


def test_09_partitioning_lowers_parity_gap(record_criterion):
    check(record_criterion, acc.criterion_partition_fairness(20))


def test_10_ablation_ordering(record_criterion):
    check(record_criterion, acc.criterion_ablation_order(20))


def test_11_attention_cost_scaling(record_criterion):
    check(record_criterion, acc.criterion_complexity())


def test_12_determinism(record_criterion):
    check(record_criterion, acc.criterion_determinism())
