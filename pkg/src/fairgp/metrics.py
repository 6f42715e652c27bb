"""Fairness and utility metrics.

Every metric that conditions on a group returns ``None`` when that group is
empty inside the mask; undefined values are never coerced to zero.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .graph import Graph, higher_order_nodes


def _mask(mask, n):
    if mask is None:
        return np.ones(n, dtype=bool)
    mask = np.asarray(mask)
    if mask.dtype != bool:
        out = np.zeros(n, dtype=bool)
        out[mask] = True
        return out
    return mask


def group_rates(pred, sensitive, mask=None, labels=None, groups=None) -> list[float | None]:
    """``P(pred = 1 | s = i)`` per group (``labels`` given: additionally ``y = 1``)."""
    pred = np.asarray(pred)
    s = np.asarray(sensitive)
    keep = _mask(mask, pred.size)
    if labels is not None:
        keep = keep & (np.asarray(labels) == 1)
    if groups is None:
        groups = range(int(s.max()) + 1 if s.size else 0)
    rates = []
    for i in groups:
        sel = keep & (s == i)
        rates.append(float(pred[sel].mean()) if sel.any() else None)
    return rates


def delta_sp(pred, sensitive, mask=None) -> float | None:
    """``|P(pred=1 | s=0) - P(pred=1 | s=1)|``; None if a group is empty."""
    r0, r1 = group_rates(pred, sensitive, mask, groups=(0, 1))
    return None if r0 is None or r1 is None else abs(r0 - r1)


def delta_eo(pred, labels, sensitive, mask=None) -> float | None:
    """``|P(pred=1 | y=1, s=0) - P(pred=1 | y=1, s=1)|``; None if a group has no positives."""
    r0, r1 = group_rates(pred, sensitive, mask, labels=labels, groups=(0, 1))
    return None if r0 is None or r1 is None else abs(r0 - r1)


def _population_variance(rates):
    if any(r is None for r in rates) or len(rates) < 2:
        return None
    return float(np.var(np.asarray(rates, dtype=np.float64)))


def delta_sp_multi(pred, sensitive, mask=None, m: int | None = None) -> float | None:
    """Population variance of the per-group positive rates over ``m`` sensitive groups."""
    groups = range(m) if m is not None else None
    return _population_variance(group_rates(pred, sensitive, mask, groups=groups))


def delta_eo_multi(pred, labels, sensitive, mask=None, m: int | None = None) -> float | None:
    groups = range(m) if m is not None else None
    return _population_variance(group_rates(pred, sensitive, mask, labels=labels, groups=groups))


def accuracy(pred, labels, mask=None) -> float:
    keep = _mask(mask, np.asarray(pred).size)
    return float(np.mean(np.asarray(pred)[keep] == np.asarray(labels)[keep]))


def auc(prob, labels, mask=None) -> float:
    """ROC-AUC via the Mann-Whitney statistic; tied scores count one half."""
    prob = np.asarray(prob, dtype=np.float64)
    labels = np.asarray(labels)
    keep = _mask(mask, prob.size)
    p, y = prob[keep], labels[keep]
    n_pos = int(np.sum(y == 1))
    n_neg = int(np.sum(y == 0))
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both classes inside the mask")
    order = np.argsort(p, kind="mergesort")
    sorted_p = p[order]
    ranks = np.empty(p.size, dtype=np.float64)
    # average ranks over ties
    _, start, counts = np.unique(sorted_p, return_index=True, return_counts=True)
    avg = start + (counts - 1) / 2.0 + 1.0
    ranks[order] = np.repeat(avg, counts)
    u = ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def sensitive_similarity(A_hat, sensitive) -> float:
    """Euclidean distance between ``s`` and its image ``A_hat @ s``."""
    A = np.asarray(getattr(A_hat, "matrix", A_hat), dtype=np.float64)
    s = np.asarray(sensitive, dtype=np.float64)
    if A.ndim != 2 or A.shape != (s.size, s.size):
        raise ValueError(f"attention matrix {A.shape} does not match sensitive vector of length {s.size}")
    return float(np.linalg.norm(s - A @ s))


# ---------------------------------------------------------------------------
# proportion tables

def normalized_ratio(count_s1: float, count_s0: float) -> tuple[float, float] | None:
    """Normalize the smaller side to 1: returns ``(ratio_s1, ratio_s0)``."""
    if count_s1 <= 0 or count_s0 <= 0:
        return None
    if count_s1 >= count_s0:
        return (count_s1 / count_s0, 1.0)
    return (1.0, count_s0 / count_s1)


@dataclass(frozen=True)
class ProportionTable:
    all_nodes: tuple | None
    higher_order: tuple | None
    prediction: tuple | None

    def majority(self, slice_name: str) -> int | None:
        """Sensitive value holding the larger share in a slice (None if undefined or tied)."""
        pair = getattr(self, slice_name)
        if pair is None or pair[0] == pair[1]:
            return None
        return 1 if pair[0] > pair[1] else 0


def proportion_table(g: Graph, pred, threshold: float, mask=None) -> ProportionTable:
    """Sensitive-group proportions among all nodes, higher-order nodes and positive predictions.

    The prediction slice compares ``P(pred=1 | s)`` between groups.
    """
    s = np.asarray(g.sensitive)
    keep = _mask(mask, g.n)
    hub = np.zeros(g.n, dtype=bool)
    hub[higher_order_nodes(g, threshold)] = True

    def counts(sel):
        return float(np.sum(sel & (s == 1))), float(np.sum(sel & (s == 0)))

    all_pair = normalized_ratio(*counts(keep))
    hub_pair = normalized_ratio(*counts(keep & hub))
    r0, r1 = group_rates(pred, s, keep, groups=(0, 1))
    pred_pair = None if r0 is None or r1 is None else normalized_ratio(r1, r0)
    return ProportionTable(all_pair, hub_pair, pred_pair)


@dataclass
class MetricsReport:
    acc: float | None
    auc: float | None
    delta_sp: float | None
    delta_eo: float | None
    rate_s0: float | None
    rate_s1: float | None
    tpr_s0: float | None
    tpr_s1: float | None
    sensitive_similarity: float | None = None

    def as_dict(self) -> dict:
        return asdict(self)


def evaluate(prob, pred, labels, sensitive, mask=None, A_hat=None) -> MetricsReport:
    """All utility and fairness numbers for one prediction vector."""
    keep = _mask(mask, np.asarray(pred).size)
    rate = group_rates(pred, sensitive, keep, groups=(0, 1))
    tpr = group_rates(pred, sensitive, keep, labels=labels, groups=(0, 1))
    try:
        auc_val = auc(prob, labels, keep)
    except ValueError:
        auc_val = None
    sim = sensitive_similarity(A_hat, sensitive) if A_hat is not None else None
    return MetricsReport(
        acc=accuracy(pred, labels, keep), auc=auc_val,
        delta_sp=delta_sp(pred, sensitive, keep), delta_eo=delta_eo(pred, labels, sensitive, keep),
        rate_s0=rate[0], rate_s1=rate[1], tpr_s0=tpr[0], tpr_s1=tpr[1],
        sensitive_similarity=sim)
