"""Graph partitioning into ``c`` disjoint, non-empty clusters.

Three strategies share one output type:

* ``partition_multilevel`` -- METIS-style: heavy-edge-matching coarsening,
  greedy graph-growing initial partition on the coarsest graph, then k-way
  boundary Fiduccia-Mattheyses refinement while projecting back up.
* ``partition_louvain`` -- modularity-greedy Louvain communities, merged or
  split to exactly ``c`` clusters.
* ``partition_random`` -- seeded shuffle dealt round-robin.

Ties are always broken toward the lowest node / cluster id.
"""

from __future__ import annotations

import heapq
import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .graph import Graph


class PartitionError(ValueError):
    pass


@dataclass(frozen=True)
class Partition:
    assignment: np.ndarray
    c: int
    sizes: np.ndarray
    balance_feasible: bool = True
    history: tuple = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        a = np.asarray(self.assignment, dtype=np.int64)
        if a.ndim != 1:
            raise PartitionError("assignment must be a vector")
        if a.size and (a.min() < 0 or a.max() >= self.c):
            raise PartitionError(f"cluster ids must lie in 0..{self.c - 1}")
        sizes = np.bincount(a, minlength=self.c)
        if np.any(sizes == 0):
            raise PartitionError("empty cluster")
        a.setflags(write=False)
        sizes.setflags(write=False)
        object.__setattr__(self, "assignment", a)
        object.__setattr__(self, "sizes", sizes)

    @property
    def n(self) -> int:
        return self.assignment.size

    def members(self, p: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == p)

    def clusters(self) -> list[np.ndarray]:
        """Node ids of every cluster, ascending cluster id."""
        order = np.argsort(self.assignment, kind="stable")
        return np.split(order, np.cumsum(self.sizes)[:-1])

    @property
    def is_even(self) -> bool:
        return bool(np.all(self.sizes == self.sizes[0]))


@dataclass(frozen=True)
class PartitionQuality:
    edge_cut: int
    balance: float


def from_assignment(assignment, c: int | None = None, **kw) -> Partition:
    """Build a Partition, renumbering clusters by first appearance."""
    a = np.asarray(assignment, dtype=np.int64)
    _, first, inv = np.unique(a, return_index=True, return_inverse=True)
    rank = np.empty(first.size, dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(first.size)
    a = rank[inv.ravel()]
    if c is not None and c != first.size:
        raise PartitionError(f"expected {c} clusters, found {first.size}")
    return Partition(a, int(first.size), np.bincount(a), **kw)


def quality(g: Graph, p: Partition) -> PartitionQuality:
    if p.n != g.n:
        raise PartitionError(f"assignment has length {p.n}, graph has {g.n} nodes")
    e = g.edge_array()
    cut = int(np.count_nonzero(p.assignment[e[:, 0]] != p.assignment[e[:, 1]]))
    return PartitionQuality(cut, float(p.sizes.max() / (g.n / p.c)))


def _check_c(g: Graph, c: int):
    if c < 1:
        raise PartitionError("c must be at least 1")
    if c > g.n:
        raise PartitionError(f"cannot split {g.n} nodes into {c} clusters")


def _trivial(g: Graph, c: int) -> Partition | None:
    if c == 1:
        return Partition(np.zeros(g.n, dtype=np.int64), 1, np.array([g.n]))
    if c == g.n:
        return Partition(np.arange(g.n), g.n, np.ones(g.n, dtype=np.int64))
    return None


# ---------------------------------------------------------------------------
# random

def partition_random(g: Graph, c: int, seed: int = 0) -> Partition:
    _check_c(g, c)
    perm = np.random.default_rng(seed).permutation(g.n)
    a = np.empty(g.n, dtype=np.int64)
    a[perm] = np.arange(g.n) % c
    return Partition(a, c, np.bincount(a, minlength=c))


# ---------------------------------------------------------------------------
# multilevel

class _Level:
    """Weighted graph used during coarsening: adjacency dicts + vertex weights."""

    def __init__(self, adj: list[dict], vw: np.ndarray):
        self.adj = adj
        self.vw = vw

    @property
    def nv(self) -> int:
        return len(self.adj)

    @classmethod
    def from_graph(cls, g: Graph) -> "_Level":
        adj = [dict.fromkeys(g.neighbors(v).tolist(), 1) for v in range(g.n)]
        return cls(adj, np.ones(g.n, dtype=np.int64))

    def cut(self, part) -> int:
        total = 0
        for v, nbrs in enumerate(self.adj):
            pv = part[v]
            for u, w in nbrs.items():
                if u > v and part[u] != pv:
                    total += w
        return total


def _coarsen(level: _Level, rng, max_vw: int):
    """Heavy-edge matching. Returns (coarse level, fine->coarse map)."""
    nv = level.nv
    match = np.full(nv, -1, dtype=np.int64)
    vw = level.vw
    for v in rng.permutation(nv).tolist():
        if match[v] >= 0:
            continue
        best, best_w = -1, -1
        for u, w in level.adj[v].items():
            if match[u] < 0 and vw[u] + vw[v] <= max_vw and (w > best_w or (w == best_w and u < best)):
                best, best_w = u, w
        if best < 0:
            match[v] = v
        else:
            match[v], match[best] = best, v

    cmap = np.full(nv, -1, dtype=np.int64)
    nc = 0
    for v in range(nv):
        if cmap[v] < 0:
            cmap[v] = cmap[match[v]] = nc
            nc += 1
    cvw = np.bincount(cmap, weights=vw, minlength=nc).astype(np.int64)
    cadj = [defaultdict(int) for _ in range(nc)]
    for v, nbrs in enumerate(level.adj):
        cv = cmap[v]
        row = cadj[cv]
        for u, w in nbrs.items():
            cu = cmap[u]
            if cu != cv:
                row[cu] += w
    return _Level([dict(sorted(r.items())) for r in cadj], cvw), cmap


def _grow_initial(level: _Level, c: int, max_pw: int, rng) -> np.ndarray:
    """Greedy graph growing: parts 0..c-2 grown to ~W/c, last part takes the rest."""
    nv = level.nv
    vw = level.vw
    degw = np.array([sum(a.values()) for a in level.adj], dtype=np.int64)
    part = np.full(nv, -1, dtype=np.int64)
    target = vw.sum() / c
    free = nv
    for p in range(c - 1):
        pw = 0
        into: dict[int, int] = {}  # frontier vertex -> edge weight into part p
        while free > c - 1 - p:
            if into:
                # smallest cut increase: most weight into p, least elsewhere
                v = max(into, key=lambda u: (2 * into[u] - degw[u], -u))
                del into[v]
            else:
                cand = np.flatnonzero(part < 0)
                v = int(cand[rng.integers(cand.size)])
            if pw > 0 and pw + vw[v] > max_pw:
                if not into:
                    break
                continue
            if pw > 0 and pw + vw[v] - target > target - pw:
                break
            part[v] = p
            pw += vw[v]
            free -= 1
            for u, w in level.adj[v].items():
                if part[u] < 0:
                    into[u] = into.get(u, 0) + w
            if pw >= target:
                break
    part[part < 0] = c - 1
    return part


def _ext_weights(level: _Level, part, v) -> dict:
    ext: dict[int, int] = {}
    for u, w in level.adj[v].items():
        q = part[u]
        ext[q] = ext.get(q, 0) + w
    return ext


def _rebalance(level: _Level, part, c: int, max_pw: int):
    """Move vertices out of overweight parts (and into empty ones) at least cut cost."""
    vw = level.vw
    pw = np.bincount(part, weights=vw, minlength=c).astype(np.int64)
    pc = np.bincount(part, minlength=c)
    for _ in range(level.nv * 2):
        empty = np.flatnonzero(pc == 0)
        heavy = np.flatnonzero(pw > max_pw)
        if empty.size == 0 and heavy.size == 0:
            break
        if empty.size:
            src_parts = [int(np.argmax(pc))]
        else:
            src_parts = [int(heavy[0])]
        src = src_parts[0]
        best = None
        for v in np.flatnonzero(part == src).tolist():
            ext = _ext_weights(level, part, v)
            own = ext.get(src, 0)
            targets = empty.tolist() if empty.size else [q for q in range(c) if q != src and pw[q] + vw[v] <= max_pw]
            for q in targets:
                key = (own - ext.get(q, 0), pw[q], v, q)
                if best is None or key < best:
                    best = key
        if best is None:
            # nothing fits: move the lightest vertex to the lightest part
            members = np.flatnonzero(part == src)
            v = int(members[np.argmin(vw[members])])
            q = int(np.argmin(np.where(np.arange(c) == src, np.iinfo(np.int64).max, pw)))
        else:
            _, _, v, q = best
        part[v] = q
        pw[src] -= vw[v]
        pw[q] += vw[v]
        pc[src] -= 1
        pc[q] += 1
    return part


def _fm_pass(level: _Level, part, c: int, max_pw: int, stall_limit: int) -> int:
    """One k-way FM pass with rollback to the best prefix. Returns the cut gain (>= 0)."""
    vw = level.vw
    adj = level.adj
    pw = np.bincount(part, weights=vw, minlength=c).astype(np.int64)
    pc = np.bincount(part, minlength=c)
    ext = [_ext_weights(level, part, v) for v in range(level.nv)]

    def best_move(v):
        own = part[v]
        if pc[own] <= 1:
            return None
        e = ext[v]
        internal = e.get(own, 0)
        best = None
        for q in sorted(e):
            if q == own or e[q] == 0 or pw[q] + vw[v] > max_pw:
                continue
            gain = e[q] - internal
            if best is None or gain > best[0]:
                best = (gain, q)
        return best

    def move(v, src, dst):
        part[v] = dst
        pw[src] -= vw[v]
        pw[dst] += vw[v]
        pc[src] -= 1
        pc[dst] += 1
        for u, w in adj[v].items():
            e = ext[u]
            e[src] -= w
            e[dst] = e.get(dst, 0) + w

    heap = []
    for v in range(level.nv):
        if len(ext[v]) > 1 or (ext[v] and part[v] not in ext[v]):
            mv = best_move(v)
            if mv is not None:
                heap.append((-mv[0], v, mv[1]))
    heapq.heapify(heap)

    moved = set()
    log = []
    total = best_total = 0
    best_len = 0
    stall = 0
    while heap and stall < stall_limit:
        neg_gain, v, q = heapq.heappop(heap)
        if v in moved:
            continue
        mv = best_move(v)
        if mv is None:
            continue
        if (-mv[0], mv[1]) != (neg_gain, q):
            heapq.heappush(heap, (-mv[0], v, mv[1]))
            continue
        src = part[v]
        move(v, src, q)
        moved.add(v)
        log.append((v, src))
        total += -neg_gain
        if total > best_total:
            best_total, best_len, stall = total, len(log), 0
        else:
            stall += 1
        for u in adj[v]:
            if u not in moved:
                mu = best_move(u)
                if mu is not None:
                    heapq.heappush(heap, (-mu[0], u, mu[1]))

    for v, src in reversed(log[best_len:]):
        move(v, part[v], src)
    return best_total


def _refine(level: _Level, part, c: int, max_pw: int, history: list, depth: int, max_passes: int = 8):
    cut = level.cut(part)
    for k in range(max_passes):
        gain = _fm_pass(level, part, c, max_pw, stall_limit=max(25, level.nv // 20))
        new_cut = level.cut(part)
        history.append((depth, k, cut, new_cut))
        cut = new_cut
        if gain <= 0:
            break
    return part


def partition_multilevel(g: Graph, c: int, balance_eps: float = 0.05, seed: int = 0,
                         n_init: int = 4) -> Partition:
    """Balanced ``c``-way partition minimizing edge cut.

    Cluster sizes stay within ``(1 + balance_eps) * n / c``. When that bound
    is unattainable (e.g. ``balance_eps = 0`` with ``c`` not dividing ``n``)
    the best-effort partition uses ``ceil(n / c)`` and ``balance_feasible`` is
    False. ``history`` records ``(level, pass, cut_before, cut_after)`` for
    every refinement pass.
    """
    _check_c(g, c)
    if balance_eps < 0:
        raise PartitionError("balance_eps must be non-negative")
    trivial = _trivial(g, c)
    if trivial is not None:
        return trivial

    n = g.n
    max_pw = math.floor((1.0 + balance_eps) * n / c + 1e-9)
    feasible = max_pw >= math.ceil(n / c)
    max_pw = max(max_pw, math.ceil(n / c))
    rng = np.random.default_rng(seed)

    coarsen_to = max(8 * c, 64)
    max_vw = max(1, min(max_pw // 3, math.ceil(1.5 * n / coarsen_to)))
    levels = [_Level.from_graph(g)]
    maps = []
    while levels[-1].nv > coarsen_to:
        coarse, cmap = _coarsen(levels[-1], rng, max_vw)
        if coarse.nv > 0.95 * levels[-1].nv:
            break
        levels.append(coarse)
        maps.append(cmap)

    coarsest = levels[-1]
    history: list = []
    best = None
    for trial in range(n_init):
        part = _grow_initial(coarsest, c, max_pw, rng)
        part = _rebalance(coarsest, part, c, max_pw)
        trial_hist: list = []
        part = _refine(coarsest, part, c, max_pw, trial_hist, len(levels) - 1)
        pw = np.bincount(part, weights=coarsest.vw, minlength=c)
        key = (int(pw.max() > max_pw), coarsest.cut(part), trial)
        if best is None or key < best[0]:
            best = (key, part, trial_hist)
    part = best[1]
    history.extend(best[2])

    for depth in range(len(levels) - 2, -1, -1):
        part = part[maps[depth]]
        level = levels[depth]
        pw = np.bincount(part, weights=level.vw, minlength=c)
        if pw.max() > max_pw or np.bincount(part, minlength=c).min() == 0:
            part = _rebalance(level, part, c, max_pw)
        part = _refine(level, part, c, max_pw, history, depth)

    sizes = np.bincount(part, minlength=c)
    if sizes.max() > max_pw:
        feasible = False
    result = from_assignment(part, c, balance_feasible=feasible, history=tuple(history))
    return result


# ---------------------------------------------------------------------------
# Louvain

def _louvain_level(adj: list[dict], loops: np.ndarray, order) -> tuple[np.ndarray, bool]:
    """Local-moving phase. ``adj`` excludes self loops, ``loops[v]`` holds their weight."""
    nv = len(adj)
    k = np.array([sum(a.values()) for a in adj], dtype=np.float64) + 2 * loops
    m2 = k.sum()
    comm = np.arange(nv)
    if m2 == 0:
        return comm, False
    tot = k.copy()
    improved = False
    while True:
        moves = 0
        for v in order:
            cv = comm[v]
            links: dict[int, float] = {}
            for u, w in adj[v].items():
                links[comm[u]] = links.get(comm[u], 0.0) + w
            tot[cv] -= k[v]
            best_c = cv
            best_gain = links.get(cv, 0.0) - tot[cv] * k[v] / m2
            for q in sorted(links):
                gain = links[q] - tot[q] * k[v] / m2
                if gain > best_gain + 1e-12:
                    best_c, best_gain = q, gain
            tot[best_c] += k[v]
            if best_c != cv:
                comm[v] = best_c
                moves += 1
        if moves == 0:
            break
        improved = True
    return comm, improved


def louvain_communities(g: Graph, seed: int = 0) -> np.ndarray:
    """Community id per node (renumbered by first appearance)."""
    rng = np.random.default_rng(seed)
    adj = [dict.fromkeys(g.neighbors(v).tolist(), 1.0) for v in range(g.n)]
    loops = np.zeros(g.n)
    node_comm = np.arange(g.n)
    while True:
        order = rng.permutation(len(adj)).tolist()
        comm, improved = _louvain_level(adj, loops, order)
        if not improved:
            break
        _, comm = np.unique(comm, return_inverse=True)
        comm = comm.ravel()
        node_comm = comm[node_comm]
        nc = int(comm.max()) + 1
        new_adj = [defaultdict(float) for _ in range(nc)]
        new_loops = np.bincount(comm, weights=loops, minlength=nc)
        for v, nbrs in enumerate(adj):
            cv = comm[v]
            for u, w in nbrs.items():
                cu = comm[u]
                if cu == cv:
                    new_loops[cv] += w / 2.0
                else:
                    new_adj[cv][cu] += w
        adj = [dict(sorted(a.items())) for a in new_adj]
        loops = new_loops
    return from_assignment(node_comm).assignment


def _fit_cluster_count(g: Graph, comm: np.ndarray, c: int) -> np.ndarray:
    """Merge smallest communities (into their best-connected neighbour) or
    split the largest round-robin until exactly ``c`` remain."""
    comm = comm.copy()
    e = g.edge_array()
    while True:
        ids, sizes = np.unique(comm, return_counts=True)
        if ids.size == c:
            return comm
        if ids.size > c:
            small = int(ids[np.lexsort((ids, sizes))[0]])
            inside = comm[e[:, 0]] == small
            outside = comm[e[:, 1]] == small
            nbr = np.concatenate([comm[e[inside & ~outside, 1]], comm[e[outside & ~inside, 0]]])
            if nbr.size:
                cand, w = np.unique(nbr, return_counts=True)
                size_of = dict(zip(ids.tolist(), sizes.tolist()))
                target = min(zip(cand.tolist(), w.tolist()), key=lambda cw: (-cw[1], size_of[cw[0]], cw[0]))[0]
            else:
                rest = ids != small
                target = int(ids[rest][np.lexsort((ids[rest], sizes[rest]))[0]])
            comm[comm == small] = target
        else:
            big = int(ids[np.lexsort((ids, -sizes))[0]])
            members = np.flatnonzero(comm == big)
            comm[members[1::2]] = int(comm.max()) + 1


def partition_louvain(g: Graph, c: int, seed: int = 0) -> Partition:
    _check_c(g, c)
    trivial = _trivial(g, c)
    if trivial is not None:
        return trivial
    comm = louvain_communities(g, seed)
    return from_assignment(_fit_cluster_count(g, comm, c), c)


STRATEGIES = {
    "multilevel": partition_multilevel,
    "louvain": partition_louvain,
    "random": partition_random,
}


def make_partition(g: Graph, strategy: str, c: int, seed: int = 0, balance_eps: float = 0.05) -> Partition:
    if strategy == "multilevel":
        return partition_multilevel(g, c, balance_eps=balance_eps, seed=seed)
    if strategy not in STRATEGIES:
        raise PartitionError(f"unknown partition strategy {strategy!r}")
    return STRATEGIES[strategy](g, c, seed=seed)
