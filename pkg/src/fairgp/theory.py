"""Numerical checks of the sensitive-feature-similarity bounds.

Three bounds are evaluated on concrete (attention matrix, sensitive vector)
instances:

* ``check_theorem1``: ``||s - A s|| <= sum of A[u, v] over pairs with s[u] != s[v]``
* ``check_lemma1``: ``||s - A s|| <= sqrt(n)``
* ``check_theorem2``: the change in ``||s - A s||`` between the full attention
  matrix and its partition approximation is at least
  ``1/(2 sqrt n)`` times the change in squared inter-cluster terms.

Each check returns a :class:`BoundReport`; nothing is asserted here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .attention import (AttentionParams, approx_partitioned_scores, attention_scores)
from .graph import Graph, build_graph
from .metrics import sensitive_similarity
from .partition import Partition, partition_multilevel

TOL = 1e-9


class NotRowStochasticError(ValueError):
    pass


@dataclass
class BoundReport:
    bound: str
    lhs: float
    rhs: float
    margin: float
    satisfied: bool
    instance: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    @classmethod
    def upper(cls, bound, lhs, rhs, **kw):
        """``lhs <= rhs`` style bound; margin = rhs - lhs."""
        margin = rhs - lhs
        return cls(bound, float(lhs), float(rhs), float(margin), bool(margin >= -TOL), **kw)

    @classmethod
    def lower(cls, bound, lhs, rhs, **kw):
        """``lhs >= rhs`` style bound; margin = lhs - rhs."""
        margin = lhs - rhs
        return cls(bound, float(lhs), float(rhs), float(margin), bool(margin >= -TOL), **kw)


def is_row_stochastic(A, atol: float = 1e-9) -> bool:
    A = np.asarray(A, dtype=np.float64)
    return bool(np.all(A >= -atol) and np.allclose(A.sum(axis=1), 1.0, rtol=0.0, atol=atol))


def _prepare(A_hat, sensitive, require_stochastic=True):
    A = np.asarray(getattr(A_hat, "matrix", A_hat), dtype=np.float64)
    s = np.asarray(sensitive, dtype=np.float64)
    if A.shape != (s.size, s.size):
        raise ValueError(f"attention matrix {A.shape} does not match {s.size} nodes")
    if not np.all((s == 0) | (s == 1)):
        raise ValueError("sensitive vector must be binary")
    if require_stochastic and not is_row_stochastic(A):
        raise NotRowStochasticError("attention matrix rows must be non-negative and sum to 1")
    return A, s


def cross_group_mass_loop(A, s) -> float:
    """Sum of ``A[u, v]`` over pairs with differing sensitive value, by direct double loop."""
    total = 0.0
    n = len(s)
    for u in range(n):
        for v in range(n):
            if s[u] != s[v]:
                total += A[u][v]
    return total


def cross_group_mass(A, s) -> float:
    """Same quantity as :func:`cross_group_mass_loop` as a bilinear form."""
    s = np.asarray(s, dtype=np.float64)
    return float(s @ A @ (1.0 - s) + (1.0 - s) @ A @ s)


def check_theorem1(A_hat, sensitive) -> BoundReport:
    A, s = _prepare(A_hat, sensitive)
    return BoundReport.upper("theorem1", sensitive_similarity(A, s), cross_group_mass(A, s),
                             instance={"n": int(s.size)})


def check_lemma1(A_hat, sensitive, require_stochastic: bool = True) -> BoundReport:
    """``||s - A s|| <= sqrt(n)``.

    With ``require_stochastic=False`` non-stochastic matrices (such as the
    partition approximation) are checked too; ``details['row_stochastic']``
    records which case applied.
    """
    A, s = _prepare(A_hat, sensitive, require_stochastic)
    return BoundReport.upper("lemma1", sensitive_similarity(A, s), math.sqrt(s.size),
                             instance={"n": int(s.size)},
                             details={"row_stochastic": is_row_stochastic(A)})


def inter_cluster_terms(M, s, assignment, c) -> np.ndarray:
    """``T[p, q] = sum_{u in V_p} (sum_{v in V_q} M[u, v] (s[u] - s[v]))^2`` for every ordered pair."""
    M = np.asarray(M, dtype=np.float64)
    diff = s[:, None] - s[None, :]
    weighted = M * diff
    onehot = np.zeros((s.size, c))
    onehot[np.arange(s.size), assignment] = 1.0
    inner = weighted @ onehot          # inner[u, q] = sum_{v in V_q} M[u, v](s_u - s_v)
    sq = inner ** 2
    return onehot.T @ sq               # [p, q]


def theorem2_quantities(A, A_prime, s, partition: Partition) -> dict:
    """All sides of the partition bound for given full and approximate matrices."""
    n = s.size
    a = np.linalg.norm(s - A @ s)
    b = np.linalg.norm(s - A_prime @ s)
    off = ~np.eye(partition.c, dtype=bool)
    t_full = inter_cluster_terms(A, s, partition.assignment, partition.c)
    t_approx = inter_cluster_terms(A_prime, s, partition.assignment, partition.c)
    k = 1.0 / (2.0 * math.sqrt(n))
    pair_rhs = k * np.abs(t_full - t_approx)
    return {
        "lhs": abs(a - b),
        "rhs": k * abs(t_full[off].sum() - t_approx[off].sum()),
        "norm_full": a,
        "norm_approx": b,
        "pair_rhs": pair_rhs,
        "squared_gap_rhs": k * abs(a * a - b * b),
        "off": off,
    }


def check_theorem2(g: Graph | np.ndarray, X, params: AttentionParams, partition: Partition,
                   scale: float | None = None) -> BoundReport:
    """Evaluate the partition bound on the attention built from ``X`` and ``params``.

    ``g`` may be a Graph (its sensitive vector is used) or the sensitive
    vector itself. ``details`` carries per-cluster-pair right-hand sides, the
    result of the squared-norm step of the argument (which is valid whenever
    both norms are at most sqrt(n)) and whether the approximation is
    row-stochastic.
    """
    s = np.asarray(g.sensitive if isinstance(g, Graph) else g, dtype=np.float64)
    if not partition.is_even:
        raise ValueError(f"partition must be exactly balanced, sizes {partition.sizes.tolist()}")
    full = attention_scores(X, params, scale)
    A_prime = approx_partitioned_scores(full, partition, X, params, scale)
    _prepare(full.matrix, s)
    q = theorem2_quantities(full.matrix, A_prime, s, partition)
    pair_margin = q["lhs"] - q["pair_rhs"][q["off"]]
    details = {
        "norm_full": q["norm_full"],
        "norm_approx": q["norm_approx"],
        "pair_rhs": q["pair_rhs"].tolist(),
        "pairs_satisfied": int(np.sum(pair_margin >= -TOL)),
        "pairs_total": int(pair_margin.size),
        "squared_gap_rhs": q["squared_gap_rhs"],
        "squared_gap_satisfied": bool(q["lhs"] - q["squared_gap_rhs"] >= -TOL),
        "approx_row_stochastic": is_row_stochastic(A_prime),
        "approx_lemma1_satisfied": bool(q["norm_approx"] <= math.sqrt(s.size) + TOL),
    }
    return BoundReport.lower("theorem2", q["lhs"], q["rhs"],
                             instance={"n": int(s.size), "c": int(partition.c)}, details=details)


# ---------------------------------------------------------------------------
# sweeps

@dataclass
class SweepConfig:
    n_min: int = 4
    n_max: int = 64
    d: int = 4
    weight_scale: float = 1.0
    edge_p: float = 0.1
    clusters: tuple = (2, 4)
    bounds: tuple = ("theorem1", "lemma1", "theorem2")


@dataclass
class Instance:
    """A fully specified random instance; ``to_dict`` is enough to replay it."""
    seed: int
    s: np.ndarray
    X: np.ndarray
    params: AttentionParams
    edges: np.ndarray
    partition: Partition | None = None

    def to_dict(self) -> dict:
        out = {
            "seed": self.seed,
            "n": int(self.s.size),
            "sensitive": self.s.astype(int).tolist(),
            "X": self.X.tolist(),
            "W_Q": self.params.W_Q.tolist(),
            "W_K": self.params.W_K.tolist(),
            "W_V": self.params.W_V.tolist(),
            "edges": self.edges.tolist(),
        }
        if self.partition is not None:
            out["assignment"] = self.partition.assignment.tolist()
        return out


def random_instance(seed: int, cfg: SweepConfig, balanced: bool = False) -> Instance:
    """Random ER graph, binary sensitive vector, features and attention weights.

    With ``balanced`` the node count is a multiple of a cluster count drawn
    from ``cfg.clusters`` and the graph is split into exactly even clusters.
    """
    rng = np.random.default_rng(seed)
    if balanced:
        c = int(rng.choice(cfg.clusters))
        lo = max(1, math.ceil(cfg.n_min / c))
        n = c * int(rng.integers(lo, cfg.n_max // c + 1))
    else:
        n = int(rng.integers(cfg.n_min, cfg.n_max + 1))
    s = rng.integers(0, 2, size=n)
    X = rng.normal(size=(n, cfg.d))
    w = [rng.normal(scale=cfg.weight_scale, size=(cfg.d, cfg.d)) for _ in range(3)]
    params = AttentionParams(*w)
    iu = np.triu_indices(n, 1)
    keep = rng.random(iu[0].size) < cfg.edge_p
    edges = np.stack([iu[0][keep], iu[1][keep]], axis=1)
    partition = None
    if balanced:
        g = build_graph(edges, X, s, np.zeros(n, dtype=int))
        partition = partition_multilevel(g, c, balance_eps=0.0, seed=seed)
    return Instance(seed, s, X, params, edges, partition)


def check_instance(inst: Instance, bounds=("theorem1", "lemma1", "theorem2")) -> list[BoundReport]:
    reports = []
    full = attention_scores(inst.X, inst.params)
    if "theorem1" in bounds:
        reports.append(check_theorem1(full, inst.s))
    if "lemma1" in bounds:
        reports.append(check_lemma1(full, inst.s))
    if "theorem2" in bounds and inst.partition is not None:
        reports.append(check_theorem2(inst.s, inst.X, inst.params, inst.partition))
    for r in reports:
        r.instance["seed"] = inst.seed
    return reports


@dataclass
class SweepResult:
    reports: list
    violations: list      # (BoundReport, Instance.to_dict()) pairs

    def counts(self) -> dict:
        out: dict = {}
        for r in self.reports:
            tot, bad = out.get(r.bound, (0, 0))
            out[r.bound] = (tot + 1, bad + (not r.satisfied))
        return out


def sweep(cfg: SweepConfig, seeds) -> SweepResult:
    """Check the configured bounds on one random instance per seed.

    Theorem 1 and Lemma 1 use unpartitioned instances; Theorem 2 uses a
    separate balanced instance per seed. Reports come back in seed order.
    """
    reports, violations = [], []
    for seed in seeds:
        insts = []
        if {"theorem1", "lemma1"} & set(cfg.bounds):
            insts.append((random_instance(seed, cfg), tuple(b for b in cfg.bounds if b != "theorem2")))
        if "theorem2" in cfg.bounds:
            insts.append((random_instance(seed, cfg, balanced=True), ("theorem2",)))
        for inst, bounds in insts:
            for r in check_instance(inst, bounds):
                reports.append(r)
                if not r.satisfied:
                    violations.append((r, inst.to_dict()))
    return SweepResult(reports, violations)
