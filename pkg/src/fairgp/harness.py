"""Experiment orchestration: repeated runs, ablation grids, strategy tables, timing.

Runs are executed seed by seed. Within one seed every variant sees the same
graph and split, and variants that reduce to the same computation (for
example unmasked attention with or without a computed partition) are trained
once and shared.

Reports are deterministic. Wall-clock measurements never enter a report;
:func:`run_timing` returns them separately.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import asdict, astuple, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .attention import (AttentionParams, FFNParams, FlopCounter, attention_layer,
                        attention_layer_backward, blocks_for)
from .data import SyntheticConfig, generate_synthetic, load_graph, save_report
from .graph import default_degree_threshold
from .metrics import evaluate, proportion_table
from .model import (PartitionConfig, SpectralConfig, TrainConfig, attention_matrix,
                    make_splits, predict, prepare_inputs, train)
from .partition import from_assignment, quality

SUMMARY_METRICS = ("acc", "auc", "delta_sp", "delta_eo", "sensitive_similarity")


def _build(cls, data: dict | None):
    data = dict(data or {})
    names = {f.name for f in fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ValueError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    return cls(**data)


@dataclass
class RunConfig:
    """Data source, model configs, repeat count and output directory.

    The source is the synthetic generator unless ``edges`` and ``features``
    name files in the :func:`fairgp.data.load_graph` format. Repeat ``i`` uses
    training seed ``train.seed + i`` and, for synthetic data, graph seed
    ``synthetic.seed + i``.
    """
    train: TrainConfig = field(default_factory=TrainConfig)
    partition: PartitionConfig = field(default_factory=lambda: PartitionConfig(clusters=16))
    spectral: SpectralConfig = field(default_factory=SpectralConfig)
    synthetic: SyntheticConfig = field(default_factory=SyntheticConfig)
    edges: str | None = None
    features: str | None = None
    meta: dict = field(default_factory=dict)
    repeat: int = 1
    out_dir: str = "runs"
    degree_quantile: float = 0.9

    def __post_init__(self):
        if self.repeat < 1:
            raise ValueError("repeat must be at least 1")
        if (self.edges is None) != (self.features is None):
            raise ValueError("edges and features must be given together")

    def seeds(self) -> list[int]:
        return [self.train.seed + i for i in range(self.repeat)]

    def to_dict(self) -> dict:
        out = asdict(self)
        if self.edges is None:
            out.pop("edges")
            out.pop("features")
            out.pop("meta")
        else:
            out.pop("synthetic")
        out.pop("out_dir")
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        data = dict(data)
        nested = {"train": TrainConfig, "partition": PartitionConfig,
                  "spectral": SpectralConfig, "synthetic": SyntheticConfig}
        syn = dict(data.get("synthetic") or {})
        if isinstance(syn.get("sensitive_skew"), list):
            syn["sensitive_skew"] = tuple(syn["sensitive_skew"])
        data["synthetic"] = syn
        kw = {k: _build(t, data.pop(k, None)) for k, t in nested.items()}
        return cls(**kw, **data)


class _SeedContext:
    """Graph, split and shared caches for one repeat."""

    def __init__(self, cfg: RunConfig, index: int):
        self.seed = cfg.train.seed + index
        if cfg.edges is not None:
            self.graph_seed = None
            g = load_graph(cfg.edges, cfg.features, cfg.meta)
        else:
            self.graph_seed = cfg.synthetic.seed + index
            g = generate_synthetic(replace(cfg.synthetic, seed=self.graph_seed))
        self.g = g.with_masks(make_splits(g, self.seed))
        self.threshold = default_degree_threshold(self.g, cfg.degree_quantile)
        self.cache: dict = {}
        self.results: dict = {}

    def run(self, tcfg: TrainConfig, pcfg: PartitionConfig, scfg: SpectralConfig) -> dict:
        tcfg = replace(tcfg, seed=self.seed)
        inputs = prepare_inputs(self.g, tcfg, pcfg, scfg, self.cache)
        # the partition only matters to training when attention is masked
        key = (astuple(replace(tcfg, no_gp=False, no_ao=not inputs.masked)), astuple(scfg),
               astuple(pcfg) if inputs.masked else None)
        if key not in self.results:
            self.results[key] = self._train(tcfg, inputs)
        record = dict(self.results[key])
        part = inputs.partition
        record["partition"] = None if part is None else {
            "strategy": pcfg.strategy, "c": part.c, "edge_cut": quality(self.g, part).edge_cut,
            "balance_feasible": part.balance_feasible, "used_for_masking": inputs.masked}
        return record

    def _train(self, tcfg, inputs) -> dict:
        g = self.g
        params, trace = train(g, tcfg, inputs=inputs)
        prob, pred = predict(g, params, inputs)
        test = g.masks.test
        metrics = evaluate(prob, pred, g.labels, g.sensitive, test,
                           A_hat=attention_matrix(params, inputs))
        table = proportion_table(g, pred, self.threshold, test)
        return {"seed": self.seed, "graph_seed": self.graph_seed,
                "metrics": metrics.as_dict(), "proportions": asdict(table),
                "final_loss": trace.loss[-1], "final_train_acc": trace.train_acc[-1]}


def summarize(records: list[dict]) -> dict:
    """Mean and population std of each metric over runs; nulls are skipped."""
    out = {}
    for name in SUMMARY_METRICS:
        vals = [r["metrics"][name] for r in records if r["metrics"][name] is not None]
        out[name] = {"mean": float(np.mean(vals)) if vals else None,
                     "std": float(np.std(vals)) if vals else None,
                     "count": len(vals)}
    return out


def run_variants(cfg: RunConfig, variants: dict) -> dict:
    """Train every ``name -> (TrainConfig, PartitionConfig)`` variant on every repeat.

    Returns ``name -> list of per-seed records`` in seed order.
    """
    out = {name: [] for name in variants}
    for i in range(cfg.repeat):
        ctx = _SeedContext(cfg, i)
        for name, (tcfg, pcfg) in variants.items():
            out[name].append(ctx.run(tcfg, pcfg, cfg.spectral))
    return out


def _report(kind: str, cfg: RunConfig, records: list[dict], **extra) -> dict:
    return {"kind": kind, "config": cfg.to_dict(), "seeds": cfg.seeds(), "runs": records,
            "summary": summarize(records), **extra}


def run_experiment(cfg: RunConfig, write: bool = True, name: str = "train") -> dict:
    """Train ``cfg.repeat`` seeds and aggregate test metrics as mean and std."""
    records = run_variants(cfg, {name: (cfg.train, cfg.partition)})[name]
    report = _report("run", cfg, records)
    if write:
        save_report(report, Path(cfg.out_dir) / f"{name}.json")
    return report


ABLATION_FLAGS = ("no_fm", "no_gp", "no_ao")


def ablation_label(flags) -> str:
    on = [f for f in ABLATION_FLAGS if f in flags]
    return "+".join(on) if on else "full"


def ablation_variants(cfg: RunConfig, combos=None) -> dict:
    if combos is None:
        combos = [tuple(f for f, on in zip(ABLATION_FLAGS, bits) if on)
                  for bits in itertools.product((False, True), repeat=3)]
    out = {}
    for combo in combos:
        tcfg = replace(cfg.train, **{f: f in combo for f in ABLATION_FLAGS})
        out[ablation_label(combo)] = (tcfg, cfg.partition)
    return out


def run_ablation_grid(cfg: RunConfig, combos=None, write: bool = True) -> dict:
    """One report per ablation flag combination (all eight by default)."""
    variants = ablation_variants(cfg, combos)
    records = run_variants(cfg, variants)
    reports = {}
    for label, (tcfg, _) in variants.items():
        vcfg = replace(cfg, train=tcfg)
        reports[label] = _report("run", vcfg, records[label], ablation=label)
        if write:
            save_report(reports[label], Path(cfg.out_dir) / f"ablation-{label}.json")
    return reports


UNPARTITIONED = "none"


def run_strategy_comparison(cfg: RunConfig, strategies=("multilevel", "louvain", "random"),
                            write: bool = True) -> dict:
    """Fairness of each partition strategy against unpartitioned attention, on shared seeds."""
    strategies = tuple(strategies)
    if len(strategies) < 2:
        raise ValueError("need at least two strategies")
    variants = {s: (replace(cfg.train, no_gp=False, no_ao=False), replace(cfg.partition, strategy=s))
                for s in strategies}
    variants[UNPARTITIONED] = (replace(cfg.train, no_gp=True), cfg.partition)
    records = run_variants(cfg, variants)
    base = [r["metrics"]["delta_sp"] for r in records[UNPARTITIONED]]
    rows = []
    for name in strategies + (UNPARTITIONED,):
        sp = [r["metrics"]["delta_sp"] for r in records[name]]
        row = {"strategy": name, "summary": summarize(records[name]),
               "delta_sp": sp, "delta_eo": [r["metrics"]["delta_eo"] for r in records[name]],
               "acc": [r["metrics"]["acc"] for r in records[name]]}
        if name != UNPARTITIONED:
            row["median_delta_sp_le_unpartitioned"] = _median_le(sp, base)
        rows.append(row)
    report = {"kind": "strategy_comparison", "config": cfg.to_dict(), "seeds": cfg.seeds(),
              "rows": rows}
    if write:
        save_report(report, Path(cfg.out_dir) / "compare-partitions.json")
    return report


def _median_le(a, b) -> bool | None:
    a = [x for x in a if x is not None]
    b = [x for x in b if x is not None]
    if not a or not b:
        return None
    return bool(np.median(a) <= np.median(b))


# ---------------------------------------------------------------------------
# timing

@dataclass
class TimingConfig:
    n: int = 4096
    d_in: int = 16
    hidden: int = 64
    cluster_counts: tuple = (4, 8, 16, 32)
    repeats: int = 3
    seed: int = 0
    out_dir: str = "runs"

    def __post_init__(self):
        self.cluster_counts = tuple(int(c) for c in self.cluster_counts)
        if len(self.cluster_counts) < 2:
            raise ValueError("need at least two cluster counts")
        if any(c < 1 or c > self.n for c in self.cluster_counts):
            raise ValueError("cluster counts must lie in 1..n")
        if self.repeats < 1:
            raise ValueError("repeats must be at least 1")


def _even_partition(n: int, c: int, rng):
    return from_assignment(rng.permutation(n) % c, c)


def _time_epoch(X, att, ffn, blocks, scale, repeats) -> float:
    """Median wall time of one forward plus backward pass of the attention layer."""
    times = []
    for _ in range(repeats + 1):
        t0 = time.perf_counter()
        out, cache = attention_layer(X, att, ffn, blocks, scale)
        attention_layer_backward(np.ones_like(out), cache, att, ffn, blocks, scale)
        times.append(time.perf_counter() - t0)
    return float(np.median(times[1:]))      # first call is a warm-up


def fit_exponent(cs, times) -> float:
    """``beta`` in ``time ~ c^-beta`` by least squares on logs."""
    slope = np.polyfit(np.log(np.asarray(cs, dtype=float)), np.log(np.asarray(times)), 1)[0]
    return float(-slope)


def run_timing(tcfg: TimingConfig, write: bool = True, measure: bool = True) -> tuple[dict, dict]:
    """Attention FLOPs per cluster count, plus wall-clock per epoch.

    Returns ``(report, wall)``: the report holds only deterministic counts,
    ``wall`` the measured seconds, the fitted exponent and the ratio between
    one cluster and no partition.
    """
    rng = np.random.default_rng(tcfg.seed)
    n, d, h = tcfg.n, tcfg.d_in, tcfg.hidden
    X = rng.normal(size=(n, d))
    lim_in, lim_h = 1 / math.sqrt(d), 1 / math.sqrt(h)
    att = AttentionParams(*(rng.uniform(-lim_in, lim_in, size=(d, h)) for _ in range(3)))
    ffn = FFNParams(rng.uniform(-lim_h, lim_h, (h, h)), np.zeros(h),
                    rng.uniform(-lim_h, lim_h, (h, h)), np.zeros(h))
    scale = math.sqrt(h)

    rows, wall_rows = [], []
    settings = [(c, _even_partition(n, c, rng)) for c in (1,) + tcfg.cluster_counts] + [(None, None)]
    for c, part in settings:
        blocks = blocks_for(part, n)
        flops = FlopCounter()
        attention_layer(X, att, ffn, blocks, scale, flops=flops)
        sum_sq = int(sum(b.size ** 2 for b in blocks))
        rows.append({"c": c, "sizes": [int(b.size) for b in blocks], "sum_sq_sizes": sum_sq,
                     "flops": flops.flops, "flops_per_sum_sq": flops.flops / sum_sq,
                     "max_block_flops": max(flops.per_block)})
        if measure:
            wall_rows.append({"c": c, "seconds": _time_epoch(X, att, ffn, blocks, scale, tcfg.repeats)})
    report = {"kind": "timing", "config": asdict(tcfg), "rows": rows}
    report["config"].pop("out_dir")

    wall = {"kind": "timing_wallclock", "rows": wall_rows}
    if measure:
        by_c = {r["c"]: r["seconds"] for r in wall_rows}
        wall["beta"] = fit_exponent(tcfg.cluster_counts, [by_c[c] for c in tcfg.cluster_counts])
        wall["c1_over_unpartitioned"] = by_c[1] / by_c[None]
    if write:
        out = Path(tcfg.out_dir)
        save_report(report, out / "timing.json")
        if measure:
            save_report(wall, out / "timing-wallclock.json")
    return report, wall
