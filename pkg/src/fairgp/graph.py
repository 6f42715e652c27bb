"""Immutable undirected graph container used throughout the package.

Adjacency is stored in compressed sparse row form (``indptr``/``indices``)
with each neighbour list sorted ascending. Node features are a dense
float64 matrix; the sensitive attribute and binarized labels are integer
vectors of length ``n``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp


class GraphError(ValueError):
    """Raised for malformed graph input (bad indices, shape mismatches)."""


@dataclass(frozen=True)
class SplitMasks:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray

    def __post_init__(self):
        masks = [np.asarray(m, dtype=bool) for m in (self.train, self.val, self.test)]
        if len({m.shape for m in masks}) != 1:
            raise GraphError("split masks must share one length")
        if np.any(masks[0] & masks[1]) or np.any(masks[0] & masks[2]) or np.any(masks[1] & masks[2]):
            raise GraphError("split masks must be pairwise disjoint")
        for name, m in zip(("train", "val", "test"), masks):
            m.setflags(write=False)
            object.__setattr__(self, name, m)


@dataclass(frozen=True)
class Graph:
    n: int
    indptr: np.ndarray
    indices: np.ndarray
    features: np.ndarray
    sensitive: np.ndarray
    labels: np.ndarray
    masks: SplitMasks | None = None
    _adj: sp.csr_matrix | None = field(default=None, repr=False, compare=False)

    @property
    def num_edges(self) -> int:
        return int(self.indices.size // 2)

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    def adjacency(self) -> sp.csr_matrix:
        """Symmetric 0/1 adjacency as a scipy CSR matrix (cached)."""
        if self._adj is None:
            data = np.ones(self.indices.size, dtype=np.float64)
            adj = sp.csr_matrix((data, self.indices, self.indptr), shape=(self.n, self.n))
            object.__setattr__(self, "_adj", adj)
        return self._adj

    def edge_array(self) -> np.ndarray:
        """Unique undirected edges as an (m, 2) array with u < v, lexicographically sorted."""
        rows = np.repeat(np.arange(self.n), self.degrees)
        keep = rows < self.indices
        return np.stack([rows[keep], self.indices[keep]], axis=1)

    def with_masks(self, masks: SplitMasks) -> "Graph":
        if masks.train.shape[0] != self.n:
            raise GraphError(f"masks have length {masks.train.shape[0]}, graph has {self.n} nodes")
        return Graph(self.n, self.indptr, self.indices, self.features, self.sensitive,
                     self.labels, masks)

    def with_features(self, features: np.ndarray) -> "Graph":
        features = _as_feature_matrix(features, self.n)
        return Graph(self.n, self.indptr, self.indices, features, self.sensitive,
                     self.labels, self.masks)

    def relabel(self, perm: np.ndarray) -> "Graph":
        """Return the graph with node ``v`` renamed to ``perm[v]``."""
        perm = np.asarray(perm, dtype=np.int64)
        inv = np.empty_like(perm)
        inv[perm] = np.arange(self.n)
        edges = perm[self.edge_array()]
        masks = None
        if self.masks is not None:
            masks = SplitMasks(self.masks.train[inv], self.masks.val[inv], self.masks.test[inv])
        g = build_graph(edges, self.features[inv], self.sensitive[inv], self.labels[inv])
        return g.with_masks(masks) if masks is not None else g


def _as_feature_matrix(features, n: int) -> np.ndarray:
    x = np.array(features, dtype=np.float64, copy=True)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    if x.ndim != 2 or x.shape[0] != n:
        raise GraphError(f"features must have {n} rows, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise GraphError("features contain non-finite entries")
    x.setflags(write=False)
    return x


def build_graph(edge_pairs, features, sensitive, labels, n: int | None = None) -> Graph:
    """Construct a :class:`Graph` from an edge list.

    Edges are symmetrized and deduplicated and self-loops are dropped. ``n``
    defaults to the length of ``sensitive``. Weighted edge lists (three
    columns) are rejected.
    """
    sensitive = np.array(sensitive, dtype=np.int64).ravel()
    labels = np.array(labels, dtype=np.int64).ravel()
    if n is None:
        n = sensitive.size
    if sensitive.size != n or labels.size != n:
        raise GraphError(f"sensitive/labels must have length {n}, got {sensitive.size}/{labels.size}")
    if n and sensitive.min() < 0:
        raise GraphError("sensitive values must be non-negative")
    features = _as_feature_matrix(features, n)

    edges = np.asarray(edge_pairs, dtype=np.int64)
    if edges.size == 0:
        edges = edges.reshape(0, 2)
    if edges.ndim != 2 or edges.shape[1] != 2:
        raise GraphError("edge_pairs must be (u, v) pairs; weighted edges are not supported")
    if edges.size and (edges.min() < 0 or edges.max() >= n):
        bad = edges[(edges < 0).any(axis=1) | (edges >= n).any(axis=1)][0]
        raise GraphError(f"edge {tuple(bad)} references a node outside 0..{n - 1}")

    edges = edges[edges[:, 0] != edges[:, 1]]
    both = np.concatenate([edges, edges[:, ::-1]])
    both = np.unique(both, axis=0)  # sorted by (row, col)
    counts = np.bincount(both[:, 0], minlength=n) if both.size else np.zeros(n, dtype=np.int64)
    indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    indices = both[:, 1].astype(np.int64) if both.size else np.zeros(0, dtype=np.int64)
    for a in (indptr, indices, sensitive, labels):
        a.setflags(write=False)
    return Graph(n, indptr, indices, features, sensitive, labels)


def degree(g: Graph, v: int) -> int:
    if not 0 <= v < g.n:
        raise GraphError(f"node {v} out of range 0..{g.n - 1}")
    return int(g.indptr[v + 1] - g.indptr[v])


def higher_order_nodes(g: Graph, threshold: float) -> np.ndarray:
    """Ids of nodes whose degree is strictly greater than ``threshold``."""
    if threshold < 0:
        raise GraphError("threshold must be non-negative")
    return np.flatnonzero(g.degrees > threshold)


def default_degree_threshold(g: Graph, quantile: float = 0.9) -> float:
    """Degree at the given quantile; the desk-scale stand-in for an absolute cutoff."""
    if g.n == 0:
        return 0.0
    return float(np.quantile(g.degrees, quantile))
