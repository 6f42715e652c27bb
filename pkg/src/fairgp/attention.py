"""Self-attention with optional cluster masking.

Masked attention is evaluated block by block: each cluster only attends to
itself, so the cost is ``sum_p |V_p|^2`` instead of ``n^2``. Unmasked
attention is the single-block special case, which keeps one code path for
forward, backward and FLOP accounting.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .partition import Partition, PartitionError


@dataclass
class AttentionParams:
    W_Q: np.ndarray
    W_K: np.ndarray
    W_V: np.ndarray
    heads: int = 1

    def __post_init__(self):
        if self.W_Q.shape != self.W_K.shape:
            raise ValueError(f"W_Q {self.W_Q.shape} and W_K {self.W_K.shape} must match")
        if self.W_V.shape[0] != self.W_Q.shape[0]:
            raise ValueError("W_V must take the same input width as W_Q")
        if self.W_Q.shape[1] % self.heads or self.W_V.shape[1] % self.heads:
            raise ValueError(f"head count {self.heads} must divide d_k and d_v")
        for w in (self.W_Q, self.W_K, self.W_V):
            if not np.all(np.isfinite(w)):
                raise ValueError("attention weights must be finite")

    @property
    def d_in(self) -> int:
        return self.W_Q.shape[0]

    @property
    def d_k(self) -> int:
        return self.W_Q.shape[1]

    @property
    def d_v(self) -> int:
        return self.W_V.shape[1]


@dataclass
class FFNParams:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray

    def __post_init__(self):
        if self.W1.shape[1] != self.b1.shape[0] or self.W1.shape[1] != self.W2.shape[0] \
                or self.W2.shape[1] != self.b2.shape[0]:
            raise ValueError("FFN dimension chain is inconsistent")

    @property
    def d_out(self) -> int:
        return self.W2.shape[1]


@dataclass
class AttentionScores:
    matrix: np.ndarray
    masked: bool = False
    partition: Partition | None = None


@dataclass
class FlopCounter:
    """Multiply-add count of the attention kernel (QK^T, softmax, AV)."""
    flops: int = 0
    per_block: list = field(default_factory=list)

    def add(self, size: int, d_k: int, d_v: int):
        f = size * size * (2 * d_k + 2 * d_v + 3)
        self.flops += f
        self.per_block.append(f)


def default_scale(params: AttentionParams) -> float:
    return float(np.sqrt(params.d_k // params.heads))


def softmax_rows(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _check_input(X, params: AttentionParams, scale):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != params.d_in:
        raise ValueError(f"input has shape {X.shape}, expected (n, {params.d_in})")
    if not np.all(np.isfinite(X)):
        raise ValueError("input contains non-finite entries")
    if scale is not None and not scale > 0:
        raise ValueError("scale must be positive")
    return X


def _head_slices(width: int, heads: int):
    step = width // heads
    return [slice(h * step, (h + 1) * step) for h in range(heads)]


def _logits(X, params, scale):
    Q = X @ params.W_Q
    K = X @ params.W_K
    return [Q[:, s] @ K[:, s].T / scale for s in _head_slices(params.d_k, params.heads)]


def attention_scores(X, params: AttentionParams, scale: float | None = None) -> AttentionScores:
    """Row softmax of ``Q K^T / scale``. With several heads the head matrices are averaged."""
    X = _check_input(X, params, scale)
    scale = default_scale(params) if scale is None else scale
    mats = [softmax_rows(s) for s in _logits(X, params, scale)]
    return AttentionScores(sum(mats) / len(mats) if len(mats) > 1 else mats[0])


def masked_attention_scores(X, params: AttentionParams, partition: Partition,
                            scale: float | None = None) -> AttentionScores:
    """Attention restricted to co-clustered pairs; inter-cluster entries are exactly zero."""
    X = _check_input(X, params, scale)
    if partition.n != X.shape[0]:
        raise ValueError(f"partition covers {partition.n} nodes, input has {X.shape[0]} rows")
    scale = default_scale(params) if scale is None else scale
    a = partition.assignment
    same = a[:, None] == a[None, :]
    mats = [softmax_rows(np.where(same, s, -np.inf)) for s in _logits(X, params, scale)]
    return AttentionScores(sum(mats) / len(mats) if len(mats) > 1 else mats[0], True, partition)


def cluster_attention(X, params: AttentionParams, partition: Partition,
                      scale: float | None = None) -> np.ndarray:
    """Cluster-level attention ``alpha`` (c x c): row softmax over mean-pooled cluster queries/keys."""
    X = _check_input(X, params, scale)
    scale = default_scale(params) if scale is None else scale
    Q = X @ params.W_Q
    K = X @ params.W_K
    counts = partition.sizes[:, None].astype(np.float64)
    qbar = np.zeros((partition.c, params.d_k))
    kbar = np.zeros((partition.c, params.d_k))
    np.add.at(qbar, partition.assignment, Q)
    np.add.at(kbar, partition.assignment, K)
    qbar /= counts
    kbar /= counts
    mats = [softmax_rows(qbar[:, s] @ kbar[:, s].T / scale)
            for s in _head_slices(params.d_k, params.heads)]
    return sum(mats) / len(mats) if len(mats) > 1 else mats[0]


def approx_partitioned_scores(A_full: AttentionScores, partition: Partition, X,
                              params: AttentionParams, scale: float | None = None) -> np.ndarray:
    """Partition approximation of a full attention matrix.

    Co-clustered entries are copied from ``A_full``; an entry between
    clusters ``p != q`` becomes ``alpha[p, q] / (n / c)``. Requires an exactly
    even partition. The result is generally not row-stochastic.
    """
    if A_full.masked:
        raise ValueError("approximation is defined from unmasked scores")
    if not partition.is_even:
        raise PartitionError(f"partition must be exactly balanced, sizes {partition.sizes.tolist()}")
    n = partition.n
    alpha = cluster_attention(X, params, partition, scale)
    a = partition.assignment
    approx = alpha[a][:, a] / (n / partition.c)
    same = a[:, None] == a[None, :]
    approx[same] = A_full.matrix[same]
    return approx


# ---------------------------------------------------------------------------
# forward / backward

def blocks_for(partition: Partition | None, n: int) -> list[np.ndarray]:
    if partition is None:
        return [np.arange(n)]
    if partition.n != n:
        raise ValueError(f"partition covers {partition.n} nodes, input has {n} rows")
    return partition.clusters()


@dataclass
class _LayerCache:
    X: np.ndarray
    Q: np.ndarray
    K: np.ndarray
    V: np.ndarray
    probs: list          # per block, per head: attention matrix
    Z: np.ndarray
    H1: np.ndarray
    R: np.ndarray


def attention_layer(X, params: AttentionParams, ffn: FFNParams, blocks, scale: float,
                    residual: bool = True, flops: FlopCounter | None = None):
    """One transformer layer over the given attention blocks. Returns (output, cache)."""
    Q = X @ params.W_Q
    K = X @ params.W_K
    V = X @ params.W_V
    qs = _head_slices(params.d_k, params.heads)
    vs = _head_slices(params.d_v, params.heads)
    Z = np.zeros((X.shape[0], params.d_v))
    probs = []
    for idx in blocks:
        Qb, Kb, Vb = Q[idx], K[idx], V[idx]
        per_head = []
        for sq, sv in zip(qs, vs):
            A = softmax_rows(Qb[:, sq] @ Kb[:, sq].T / scale)
            Z[idx, sv] = A @ Vb[:, sv]
            per_head.append(A)
        probs.append(per_head)
        if flops is not None:
            flops.add(idx.size, params.d_k, params.d_v)
    H1 = Z @ ffn.W1 + ffn.b1
    R = np.maximum(H1, 0.0)
    out = R @ ffn.W2 + ffn.b2
    if residual:
        out = out + Z
    return out, _LayerCache(X, Q, K, V, probs, Z, H1, R)


def attention_layer_backward(d_out, cache: _LayerCache, params: AttentionParams,
                             ffn: FFNParams, blocks, scale: float, residual: bool = True):
    """Gradients of a scalar loss through :func:`attention_layer`.

    Returns ``(dX, attention grads dict, ffn grads dict)``.
    """
    dW2 = cache.R.T @ d_out
    db2 = d_out.sum(axis=0)
    dR = d_out @ ffn.W2.T
    dH1 = dR * (cache.H1 > 0)
    dW1 = cache.Z.T @ dH1
    db1 = dH1.sum(axis=0)
    dZ = dH1 @ ffn.W1.T
    if residual:
        dZ = dZ + d_out

    dQ = np.zeros_like(cache.Q)
    dK = np.zeros_like(cache.K)
    dV = np.zeros_like(cache.V)
    qs = _head_slices(params.d_k, params.heads)
    vs = _head_slices(params.d_v, params.heads)
    for idx, per_head in zip(blocks, cache.probs):
        Qb, Kb, Vb, dZb = cache.Q[idx], cache.K[idx], cache.V[idx], dZ[idx]
        for A, sq, sv in zip(per_head, qs, vs):
            dA = dZb[:, sv] @ Vb[:, sv].T
            dV[idx, sv] += A.T @ dZb[:, sv]
            dS = A * (dA - (dA * A).sum(axis=1, keepdims=True)) / scale
            dQ[idx, sq] += dS @ Kb[:, sq]
            dK[idx, sq] += dS.T @ Qb[:, sq]
    X = cache.X
    grads_att = {"W_Q": X.T @ dQ, "W_K": X.T @ dK, "W_V": X.T @ dV}
    grads_ffn = {"W1": dW1, "b1": db1, "W2": dW2, "b2": db2}
    dX = dQ @ params.W_Q.T + dK @ params.W_K.T + dV @ params.W_V.T
    return dX, grads_att, grads_ffn


def forward(X, params: AttentionParams, ffn: FFNParams, partition: Partition | None = None,
            scale: float | None = None, residual: bool = True,
            flops: FlopCounter | None = None) -> np.ndarray:
    """``FFN(A V)`` (plus ``A V`` when ``residual``), with ``A`` masked to clusters if given."""
    X = _check_input(X, params, scale)
    if ffn.W1.shape[0] != params.d_v:
        raise ValueError(f"FFN expects width {ffn.W1.shape[0]}, attention yields {params.d_v}")
    if residual and ffn.d_out != params.d_v:
        raise ValueError("residual connection needs d_out == d_v")
    scale = default_scale(params) if scale is None else scale
    out, _ = attention_layer(X, params, ffn, blocks_for(partition, X.shape[0]), scale,
                             residual, flops)
    return out
