"""Graph loading, synthetic fairness-biased graphs, and run-report files.

File formats
------------
Edge list: one ``u v`` pair per line, whitespace separated; ``#`` starts a
comment. Ids are arbitrary tokens that must appear in the feature file.

Feature CSV: a header row, then ``id, f1, ..., fd, sensitive, label`` per
node. Ids are remapped to ``0..n-1`` in file order; labels are binarized.

Reports: JSON with sorted keys, reals rounded to 6 significant digits and
undefined values written as ``null``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, is_dataclass
from pathlib import Path

import numpy as np

from .graph import Graph, GraphError, build_graph
from .model import binarize_labels


class FormatError(ValueError):
    pass


# ---------------------------------------------------------------------------
# loading / saving graphs

def load_graph(edge_path, feature_path, meta: dict | None = None,
               mapping_path=None) -> Graph:
    """Read an edge list and a feature CSV into a :class:`Graph`.

    ``meta`` may name the sensitive and label columns (``sensitive_column``,
    ``label_column``); by default they are the last two. When
    ``mapping_path`` is given, the external-id -> node-id map is written there
    as a two-column CSV.
    """
    meta = meta or {}
    feature_path = Path(feature_path)
    with feature_path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise FormatError(f"{feature_path}: empty feature file") from None
        if len(header) < 3:
            raise FormatError(f"{feature_path}:1: header needs id, sensitive and label columns")
        s_col = header.index(meta["sensitive_column"]) if "sensitive_column" in meta else len(header) - 2
        y_col = header.index(meta["label_column"]) if "label_column" in meta else len(header) - 1
        f_cols = [i for i in range(1, len(header)) if i not in (s_col, y_col)]
        ids, feats, sens, labels = {}, [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or not "".join(row).strip():
                continue
            if len(row) != len(header):
                raise FormatError(f"{feature_path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            key = row[0].strip()
            if key in ids:
                raise FormatError(f"{feature_path}:{lineno}: duplicate node id {key!r}")
            try:
                feats.append([float(row[i]) for i in f_cols])
                sens.append(int(row[s_col]))
                labels.append(int(row[y_col]))
            except ValueError as exc:
                raise FormatError(f"{feature_path}:{lineno}: non-numeric field ({exc})") from None
            ids[key] = len(ids)

    edges = []
    edge_path = Path(edge_path)
    with edge_path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise FormatError(f"{edge_path}:{lineno}: expected 'u v', got {line!r}")
            try:
                edges.append((ids[parts[0]], ids[parts[1]]))
            except KeyError as exc:
                raise FormatError(f"{edge_path}:{lineno}: node {exc.args[0]!r} has no feature row") from None

    n = len(ids)
    features = np.asarray(feats, dtype=np.float64).reshape(n, len(f_cols))
    labels = binarize_labels(labels) if n else np.zeros(0, dtype=np.int64)
    g = build_graph(np.asarray(edges, dtype=np.int64).reshape(-1, 2), features, sens, labels, n=n)
    if mapping_path is not None:
        with Path(mapping_path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["external_id", "node"])
            w.writerows(ids.items())
    return g


def save_graph(g: Graph, edge_path, feature_path) -> None:
    """Write ``g`` in the formats read by :func:`load_graph`."""
    with Path(edge_path).open("w") as fh:
        fh.write("# u v\n")
        for u, v in g.edge_array().tolist():
            fh.write(f"{u} {v}\n")
    with Path(feature_path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id"] + [f"f{i + 1}" for i in range(g.features.shape[1])] + ["sensitive", "label"])
        for v in range(g.n):
            w.writerow([v] + [repr(float(x)) for x in g.features[v]] + [int(g.sensitive[v]), int(g.labels[v])])


# ---------------------------------------------------------------------------
# synthetic graphs

@dataclass
class SyntheticConfig:
    """Stochastic block model with a high-degree hub population.

    ``sensitive_skew`` is P(s=1) for ordinary nodes, either one value per
    block or a single centre from which ``skew_spread`` fans the blocks out
    linearly. Hubs draw s with ``hub_skew``, normally on the other side of 0.5.
    Block label effects span ``+-block_label_spread`` and are ranked like the
    block skews, so s and y are correlated only through the block.
    Hub nodes have their connection probabilities multiplied by
    ``hub_degree_boost``. ``label_bias`` shifts P(y=1) up for s=1 and down for
    s=0 by half its value each; ``hub_label_shift`` moves hub labels the same
    way. Features are label-informative Gaussians (``feature_signal`` sets the
    class separation); ``proxy_strength`` adds a noisy copy of s as a feature.
    """
    n: int = 2000
    blocks: int = 8
    intra_p: float = 0.02
    inter_p: float = 0.001
    sensitive_skew: float | tuple = 0.3
    skew_spread: float = 0.2
    hub_fraction: float = 0.1
    hub_degree_boost: float = 6.0
    hub_skew: float = 0.8
    label_bias: float = 0.0
    block_label_spread: float = 0.35
    hub_label_shift: float = 0.0
    feature_dim: int = 8
    feature_signal: float = 0.2
    proxy_strength: float = 2.0
    seed: int = 0

    def validate(self):
        probs = {"intra_p": self.intra_p, "inter_p": self.inter_p, "hub_skew": self.hub_skew}
        skew = np.atleast_1d(self.sensitive_skew)
        if skew.size not in (1, self.blocks):
            raise ValueError("sensitive_skew needs one value or one per block")
        for i, p in enumerate(self.block_skews()):
            probs[f"sensitive_skew[{i}]"] = float(p)
        for name, p in probs.items():
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {p}")
        if not 0.0 <= self.hub_fraction < 1.0:
            raise ValueError("hub_fraction must lie in [0, 1)")
        if self.n < 1 or self.blocks < 1 or self.blocks > self.n:
            raise ValueError("need 1 <= blocks <= n")
        if self.hub_degree_boost < 0:
            raise ValueError("hub_degree_boost must be non-negative")
        size = self.n / self.blocks
        boost = max(1.0, self.hub_degree_boost)
        expected_hub_degree = boost * (self.intra_p * size + self.inter_p * (self.n - size))
        if expected_hub_degree > self.n - 1:
            raise ValueError(f"expected hub degree {expected_hub_degree:.1f} exceeds n - 1")

    def block_skews(self) -> np.ndarray:
        skew = np.atleast_1d(np.asarray(self.sensitive_skew, dtype=np.float64))
        if skew.size > 1:
            return skew
        return skew[0] + np.linspace(-self.skew_spread, self.skew_spread, self.blocks)


def generate_synthetic(cfg: SyntheticConfig) -> Graph:
    """Sample a fairness-biased graph; identical for identical configs."""
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n
    block = rng.permutation(np.arange(n) % cfg.blocks)
    hub = np.zeros(n, dtype=bool)
    hub[rng.choice(n, size=int(round(cfg.hub_fraction * n)), replace=False)] = True

    skew = cfg.block_skews()
    p_s1 = np.where(hub, cfg.hub_skew, skew[block])
    s = (rng.random(n) < p_s1).astype(np.int64)

    factor = np.where(hub, cfg.hub_degree_boost, 1.0)
    iu, iv = np.triu_indices(n, 1)
    p = np.where(block[iu] == block[iv], cfg.intra_p, cfg.inter_p) * factor[iu] * factor[iv]
    keep = rng.random(iu.size) < np.minimum(p, 1.0)
    edges = np.stack([iu[keep], iv[keep]], axis=1)
    del iu, iv, p, keep

    spread = np.linspace(-cfg.block_label_spread, cfg.block_label_spread, cfg.blocks)
    # rank blocks by skew (random tie-break) so label effects follow it
    rank = np.lexsort((rng.permutation(cfg.blocks), skew))
    block_effect = np.empty(cfg.blocks)
    block_effect[rank] = spread
    p_y = 0.5 + block_effect[block] + cfg.label_bias * (s - 0.5) + cfg.hub_label_shift * hub * (2 * s - 1)
    y = (rng.random(n) < np.clip(p_y, 0.02, 0.98)).astype(np.int64)

    direction = rng.normal(size=cfg.feature_dim)
    direction /= np.linalg.norm(direction)
    feats = rng.normal(size=(n, cfg.feature_dim)) + cfg.feature_signal * np.outer(2 * y - 1, direction)
    if cfg.proxy_strength > 0:
        proxy = cfg.proxy_strength * (2 * s - 1) + rng.normal(size=n)
        feats = np.hstack([feats, proxy[:, None]])
    return build_graph(edges, feats, s, y)


# ---------------------------------------------------------------------------
# reports

def _round(x: float) -> float | None:
    if x is None or not math.isfinite(x):
        return None
    return float(f"{x:.6g}")


def to_jsonable(obj):
    """Recursively convert dataclasses / numpy values to JSON-ready data with 6-digit reals."""
    if is_dataclass(obj) and not isinstance(obj, type):
        return to_jsonable(asdict(obj))
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _round(float(obj))
    if obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps_report(report) -> str:
    return json.dumps(to_jsonable(report), sort_keys=True, indent=2, allow_nan=False) + "\n"


def save_report(report, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_report(report))
    return path


def load_report(path) -> dict:
    return json.loads(Path(path).read_text())


REPORT_KEYS = {"kind", "config"}


def validate_report(report: dict) -> None:
    """Minimal layout check shared by every report kind."""
    missing = REPORT_KEYS - set(report)
    if missing:
        raise FormatError(f"report lacks keys {sorted(missing)}")
    if not isinstance(report["config"], dict):
        raise FormatError("report 'config' must be a mapping")
