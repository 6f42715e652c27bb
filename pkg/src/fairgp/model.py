"""Node-classification model and training loop.

Pipeline: fused features ``H || S`` -> cluster partition -> masked attention
layer(s) -> linear classifier -> cross-entropy on the training mask.
Gradients are derived by hand (see :mod:`fairgp.attention` for the layer
backward pass).
"""

from __future__ import annotations

import logging
import math
from dataclasses import astuple, dataclass, field

import numpy as np

from .attention import (AttentionParams, FFNParams, FlopCounter, attention_layer,
                        attention_layer_backward, attention_scores, blocks_for,
                        masked_attention_scores)
from .graph import Graph, SplitMasks
from .partition import Partition, make_partition
from .spectral import fuse_features, top_eigenpairs

log = logging.getLogger(__name__)


class TrainingDivergedError(RuntimeError):
    def __init__(self, epoch: int, loss: float):
        super().__init__(f"loss became non-finite ({loss}) at epoch {epoch}")
        self.epoch = epoch


@dataclass
class SpectralConfig:
    t: int = 3
    tol: float = 1e-10
    max_iter: int = 300
    standardize: bool = True


@dataclass
class PartitionConfig:
    strategy: str = "multilevel"
    clusters: int | None = None     # None -> max(2, n // 64)
    balance_eps: float = 0.05

    def __post_init__(self):
        if self.clusters is not None and self.clusters < 1:
            raise ValueError("clusters must be at least 1")
        if self.balance_eps < 0:
            raise ValueError("balance_eps must be non-negative")

    def resolve_clusters(self, n: int) -> int:
        c = self.clusters if self.clusters is not None else max(2, n // 64)
        return min(c, n)


@dataclass
class TrainConfig:
    epochs: int = 100
    lr: float = 1e-3
    optimizer: str = "adam"
    seed: int = 0
    no_fm: bool = False
    no_gp: bool = False
    no_ao: bool = False
    hidden: int = 64
    heads: int = 1
    layers: int = 1
    scale_by_n: bool = False
    residual: bool = True

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError("lr must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


@dataclass
class ModelParams:
    layers: list            # [(AttentionParams, FFNParams), ...]
    W_out: np.ndarray       # d_out x 2
    b_out: np.ndarray       # 2

    def tensors(self) -> list[np.ndarray]:
        """All trainable arrays in a fixed order (shared with :func:`loss_and_grads`)."""
        out = []
        for att, ffn in self.layers:
            out += [att.W_Q, att.W_K, att.W_V, ffn.W1, ffn.b1, ffn.W2, ffn.b2]
        return out + [self.W_out, self.b_out]

    def copy(self) -> "ModelParams":
        layers = [(AttentionParams(a.W_Q.copy(), a.W_K.copy(), a.W_V.copy(), a.heads),
                   FFNParams(f.W1.copy(), f.b1.copy(), f.W2.copy(), f.b2.copy()))
                  for a, f in self.layers]
        return ModelParams(layers, self.W_out.copy(), self.b_out.copy())


@dataclass
class ModelInputs:
    """Everything the forward pass needs besides the weights."""
    X: np.ndarray
    partition: Partition | None     # partition actually computed (None under no_gp)
    masked: bool                    # whether attention is restricted to clusters
    scale: float
    residual: bool = True

    @property
    def blocks(self) -> list[np.ndarray]:
        return blocks_for(self.partition if self.masked else None, self.X.shape[0])


@dataclass
class TrainTrace:
    loss: list = field(default_factory=list)
    train_acc: list = field(default_factory=list)
    inputs: ModelInputs | None = None


def init_params(d_in: int, hidden: int, layers: int = 1, heads: int = 1,
                rng: np.random.Generator | None = None) -> ModelParams:
    """Weights uniform in +-1/sqrt(fan_in); biases zero."""
    rng = rng if rng is not None else np.random.default_rng(0)

    def u(fan_in, fan_out):
        b = 1.0 / math.sqrt(fan_in)
        return rng.uniform(-b, b, size=(fan_in, fan_out))

    stack = []
    width = d_in
    for _ in range(layers):
        att = AttentionParams(u(width, hidden), u(width, hidden), u(width, hidden), heads)
        ffn = FFNParams(u(hidden, hidden), np.zeros(hidden), u(hidden, hidden), np.zeros(hidden))
        stack.append((att, ffn))
        width = hidden
    return ModelParams(stack, u(width, 2), np.zeros(2))


# ---------------------------------------------------------------------------
# loss

def _log_softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def cross_entropy(logits, targets) -> float:
    """Mean negative log-softmax of the target logit."""
    logits = np.asarray(logits, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.int64)
    if targets.size == 0:
        raise ValueError("cross entropy over an empty target set")
    if np.any((targets < 0) | (targets > 1)):
        raise ValueError("targets must be 0 or 1")
    return float(-_log_softmax(logits)[np.arange(targets.size), targets].mean())


def model_forward(params: ModelParams, inputs: ModelInputs, flops: FlopCounter | None = None):
    blocks = inputs.blocks
    h = inputs.X
    caches = []
    for att, ffn in params.layers:
        h, cache = attention_layer(h, att, ffn, blocks, inputs.scale, inputs.residual, flops)
        caches.append(cache)
    logits = h @ params.W_out + params.b_out
    return logits, (h, caches, blocks)


def loss_and_grads(params: ModelParams, inputs: ModelInputs, idx, targets, return_logits=False):
    """Cross-entropy over nodes ``idx`` and its gradient for every tensor in ``params.tensors()``."""
    logits, (h, caches, blocks) = model_forward(params, inputs)
    targets = np.asarray(targets, dtype=np.int64)
    sel = logits[idx]
    loss = cross_entropy(sel, targets)
    p = np.exp(_log_softmax(sel))
    p[np.arange(targets.size), targets] -= 1.0
    d_logits = np.zeros_like(logits)
    d_logits[idx] = p / targets.size

    grads_tail = [h.T @ d_logits, d_logits.sum(axis=0)]
    d_h = d_logits @ params.W_out.T
    layer_grads = []
    for (att, ffn), cache in zip(reversed(params.layers), reversed(caches)):
        d_h, ga, gf = attention_layer_backward(d_h, cache, att, ffn, blocks, inputs.scale,
                                               inputs.residual)
        layer_grads.append([ga["W_Q"], ga["W_K"], ga["W_V"], gf["W1"], gf["b1"], gf["W2"], gf["b2"]])
    grads = [g for lg in reversed(layer_grads) for g in lg] + grads_tail
    if return_logits:
        return loss, grads, logits
    return loss, grads


# ---------------------------------------------------------------------------
# optimizers

class Adam:
    def __init__(self, tensors, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(t) for t in tensors]
        self.v = [np.zeros_like(t) for t in tensors]
        self.t = 0

    def step(self, tensors, grads):
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for w, g, m, v in zip(tensors, grads, self.m, self.v):
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            w -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


class SGD:
    def __init__(self, tensors, lr=1e-2):
        self.lr = lr

    def step(self, tensors, grads):
        for w, g in zip(tensors, grads):
            w -= self.lr * g


# ---------------------------------------------------------------------------
# data preparation

def binarize_labels(raw) -> np.ndarray:
    """Keep 0 and 1, map every class above 1 to 1."""
    raw = np.asarray(raw, dtype=np.int64)
    if np.any(raw < 0):
        raise ValueError("labels must be non-negative")
    return np.minimum(raw, 1)


def make_splits(g: Graph, seed: int = 0, val_frac: float = 0.25, test_frac: float = 0.25,
                train_frac: float = 0.5, train_cap: int = 1000) -> SplitMasks:
    """Per-class stratified split.

    Each class contributes ``floor(25%)`` of its nodes to validation and to
    test; from the rest, ``min(ceil(50% of class), 1000)`` go to training.
    """
    if np.any((g.labels < 0) | (g.labels > 1)):
        raise ValueError("labels must be binarized before splitting")
    rng = np.random.default_rng(seed)
    train = np.zeros(g.n, dtype=bool)
    val = np.zeros(g.n, dtype=bool)
    test = np.zeros(g.n, dtype=bool)
    for cls in (0, 1):
        members = np.flatnonzero(g.labels == cls)
        if members.size < 4:
            raise ValueError(f"class {cls} has {members.size} nodes; at least 4 are needed")
        members = rng.permutation(members)
        n_val = int(math.floor(val_frac * members.size))
        n_test = int(math.floor(test_frac * members.size))
        rest = members[n_val + n_test:]
        n_train = min(int(math.ceil(train_frac * members.size)), train_cap, rest.size)
        val[members[:n_val]] = True
        test[members[n_val:n_val + n_test]] = True
        train[rest[:n_train]] = True
    return SplitMasks(train, val, test)


def prepare_inputs(g: Graph, cfg: TrainConfig, partition_cfg: PartitionConfig | None = None,
                   spectral_cfg: SpectralConfig | None = None,
                   cache: dict | None = None) -> ModelInputs:
    """Build the fused feature matrix, the partition and the attention scale for ``cfg``.

    ``cache`` (any dict) lets several configs on the same graph share the
    eigendecomposition and the partition.
    """
    partition_cfg = partition_cfg or PartitionConfig()
    spectral_cfg = spectral_cfg or SpectralConfig()
    cache = {} if cache is None else cache
    if cfg.no_fm or spectral_cfg.t == 0:
        X = np.array(g.features, dtype=np.float64)
    else:
        key = ("fused", astuple(spectral_cfg), cfg.seed)
        if key not in cache:
            eig = top_eigenpairs(g, min(spectral_cfg.t, g.n), spectral_cfg.tol,
                                 spectral_cfg.max_iter, seed=cfg.seed)
            cache[key] = fuse_features(g, eig, standardize=spectral_cfg.standardize)
        X = cache[key]
    partition = None
    if not cfg.no_gp:
        c = partition_cfg.resolve_clusters(g.n)
        key = ("partition", partition_cfg.strategy, c, partition_cfg.balance_eps, cfg.seed)
        if key not in cache:
            cache[key] = make_partition(g, partition_cfg.strategy, c, seed=cfg.seed,
                                        balance_eps=partition_cfg.balance_eps)
        partition = cache[key]
    masked = partition is not None and not cfg.no_ao
    d_head = cfg.hidden // cfg.heads
    scale = math.sqrt(g.n) if cfg.scale_by_n else math.sqrt(d_head)
    return ModelInputs(X, partition, masked, scale, cfg.residual)


def attention_matrix(params: ModelParams, inputs: ModelInputs) -> np.ndarray:
    """Dense first-layer attention matrix as used in training (masked when ``inputs.masked``)."""
    att = params.layers[0][0]
    if inputs.masked:
        return masked_attention_scores(inputs.X, att, inputs.partition, inputs.scale).matrix
    return attention_scores(inputs.X, att, inputs.scale).matrix


def train(g: Graph, cfg: TrainConfig, partition_cfg: PartitionConfig | None = None,
          spectral_cfg: SpectralConfig | None = None,
          inputs: ModelInputs | None = None) -> tuple[ModelParams, TrainTrace]:
    """Fit the model on ``g.masks.train`` for ``cfg.epochs`` full-batch steps.

    Deterministic given ``cfg.seed``. Pass precomputed ``inputs`` to reuse a
    feature matrix and partition across runs.
    """
    if g.masks is None:
        raise ValueError("graph has no split masks; see make_splits")
    idx = np.flatnonzero(g.masks.train)
    targets = g.labels[idx]
    if np.unique(targets).size < 2:
        raise ValueError("training mask must contain both classes")
    if inputs is None:
        inputs = prepare_inputs(g, cfg, partition_cfg, spectral_cfg)

    rng = np.random.default_rng(cfg.seed)
    params = init_params(inputs.X.shape[1], cfg.hidden, cfg.layers, cfg.heads, rng)
    tensors = params.tensors()
    opt = Adam(tensors, cfg.lr) if cfg.optimizer == "adam" else SGD(tensors, cfg.lr)
    trace = TrainTrace(inputs=inputs)
    for epoch in range(cfg.epochs):
        loss, grads, logits = loss_and_grads(params, inputs, idx, targets, return_logits=True)
        if not np.isfinite(loss):
            raise TrainingDivergedError(epoch, loss)
        trace.loss.append(loss)
        trace.train_acc.append(float(np.mean(np.argmax(logits[idx], axis=1) == targets)))
        opt.step(tensors, grads)
        if log.isEnabledFor(logging.DEBUG):
            log.debug("epoch %d loss %.6f", epoch, loss)
    return params, trace


def predict(g: Graph, params: ModelParams, inputs: ModelInputs) -> tuple[np.ndarray, np.ndarray]:
    """Class-1 probability and hard label for every node (ties go to class 0)."""
    if inputs.X.shape[0] != g.n:
        raise ValueError("inputs were prepared for a different graph")
    logits, _ = model_forward(params, inputs)
    prob = np.exp(_log_softmax(logits))
    labels = (logits[:, 1] > logits[:, 0]).astype(np.int64)
    return prob[:, 1], labels
