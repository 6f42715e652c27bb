"""Command-line entry point (``fairgp``).

Every run option can come from flags, from ``--set section.key=value``
overrides, or from one JSON config file (``--config``); explicit flags win
over ``--set``, which wins over the file.
"""

from __future__ import annotations

import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import click

from .data import SyntheticConfig, generate_synthetic, save_graph, save_report
from .harness import (RunConfig, TimingConfig, run_ablation_grid, run_experiment,
                      run_strategy_comparison, run_timing)
from .partition import STRATEGIES
from .theory import SweepConfig, sweep

# flag name -> (config section, key); section None means top level
RUN_FLAGS = {
    "spectral_t": ("spectral", "t"),
    "spectral_tol": ("spectral", "tol"),
    "spectral_max_iter": ("spectral", "max_iter"),
    "partition": ("partition", "strategy"),
    "clusters": ("partition", "clusters"),
    "balance_eps": ("partition", "balance_eps"),
    "seed": ("train", "seed"),
    "epochs": ("train", "epochs"),
    "lr": ("train", "lr"),
    "optimizer": ("train", "optimizer"),
    "hidden": ("train", "hidden"),
    "heads": ("train", "heads"),
    "layers": ("train", "layers"),
    "scale_by_n": ("train", "scale_by_n"),
    "no_fm": ("train", "no_fm"),
    "no_gp": ("train", "no_gp"),
    "no_ao": ("train", "no_ao"),
    "n": ("synthetic", "n"),
    "graph_seed": ("synthetic", "seed"),
    "edges": (None, "edges"),
    "features": (None, "features"),
    "repeat": (None, "repeat"),
    "out": (None, "out_dir"),
}


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _apply(data: dict, section, key, value):
    if section is None:
        data[key] = value
    else:
        data.setdefault(section, {})[key] = value


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise click.BadParameter(f"{path}: {exc}", param_hint="--config") from None
    if not isinstance(data, dict):
        raise click.BadParameter(f"{path}: top level must be an object", param_hint="--config")
    return data


def _overrides(data: dict, sets) -> dict:
    for item in sets:
        if "=" not in item:
            raise click.BadParameter(f"expected key=value, got {item!r}", param_hint="--set")
        key, value = item.split("=", 1)
        section, _, name = key.rpartition(".")
        _apply(data, section or None, name, _parse_value(value))
    return data


def merged_config(config_path, sets, flags: dict, table: dict) -> dict:
    data = _overrides(_load_config(config_path), sets)
    for name, value in flags.items():
        if value is not None and name in table:
            _apply(data, *table[name], value)
    return data


def run_options(f):
    opts = [
        click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
                     help="JSON config file with sections train, partition, spectral, synthetic."),
        click.option("--set", "sets", multiple=True, metavar="SECTION.KEY=VALUE",
                     help="Override any config entry (repeatable)."),
        click.option("--edges", type=click.Path(exists=True, dir_okay=False),
                     help="Edge list; use with --features instead of synthetic data."),
        click.option("--features", type=click.Path(exists=True, dir_okay=False)),
        click.option("--n", type=int, help="Synthetic node count."),
        click.option("--graph-seed", type=int, help="Synthetic graph seed."),
        click.option("--spectral-t", type=int, help="Number of eigenpairs fused into the features."),
        click.option("--spectral-tol", type=float),
        click.option("--spectral-max-iter", type=int),
        click.option("--partition", type=click.Choice(sorted(STRATEGIES))),
        click.option("--clusters", type=int),
        click.option("--balance-eps", type=float),
        click.option("--seed", type=int),
        click.option("--epochs", type=int),
        click.option("--lr", type=float),
        click.option("--optimizer", type=click.Choice(["adam", "sgd"])),
        click.option("--hidden", type=int),
        click.option("--heads", type=int),
        click.option("--layers", type=int),
        click.option("--scale-by-n", is_flag=True, default=None,
                     help="Scale attention logits by sqrt(n) instead of sqrt(d)."),
        click.option("--no-fm", is_flag=True, default=None, help="Skip spectral feature fusion."),
        click.option("--no-gp", is_flag=True, default=None, help="Skip partitioning."),
        click.option("--no-ao", is_flag=True, default=None, help="Compute the partition but do not mask."),
        click.option("--repeat", type=int, help="Number of seeds."),
        click.option("--out", type=click.Path(file_okay=False), help="Output directory."),
    ]
    for opt in reversed(opts):
        f = opt(f)
    return f


def build_run_config(config_path, sets, flags) -> RunConfig:
    try:
        return RunConfig.from_dict(merged_config(config_path, sets, flags, RUN_FLAGS))
    except (TypeError, ValueError) as exc:
        raise click.UsageError(str(exc)) from None


def _echo_summary(label, report):
    s = report["summary"]

    def fmt(m):
        v = s[m]
        return "n/a" if v["mean"] is None else f"{v['mean']:.4f}+-{v['std']:.4f}"

    click.echo(f"{label}: acc {fmt('acc')}  auc {fmt('auc')}  "
               f"dSP {fmt('delta_sp')}  dEO {fmt('delta_eo')}")


@click.group()
@click.option("-v", "--verbose", count=True)
def main(verbose):
    """Fair graph transformer experiments."""
    logging.basicConfig(level=logging.WARNING - 10 * min(verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")


@main.command("train")
@run_options
def train_cmd(config_path, sets, **flags):
    """Train and evaluate over the configured seeds."""
    cfg = build_run_config(config_path, sets, flags)
    report = run_experiment(cfg)
    _echo_summary("run", report)
    click.echo(f"wrote {Path(cfg.out_dir) / 'train.json'}")


@main.command("ablate")
@run_options
def ablate_cmd(config_path, sets, **flags):
    """Run all eight combinations of --no-fm, --no-gp and --no-ao."""
    cfg = build_run_config(config_path, sets, flags)
    for label, report in run_ablation_grid(cfg).items():
        _echo_summary(label, report)
    click.echo(f"wrote 8 reports to {cfg.out_dir}")


@main.command("compare-partitions")
@run_options
@click.option("--strategies", default="multilevel,louvain,random", show_default=True,
              help="Comma-separated partition strategies.")
def compare_cmd(config_path, sets, strategies, **flags):
    """Compare partition strategies against unpartitioned attention."""
    cfg = build_run_config(config_path, sets, flags)
    names = [s.strip() for s in strategies.split(",") if s.strip()]
    bad = [s for s in names if s not in STRATEGIES]
    if bad:
        raise click.BadParameter(f"unknown strategies {bad}", param_hint="--strategies")
    try:
        report = run_strategy_comparison(cfg, names)
    except ValueError as exc:
        raise click.UsageError(str(exc)) from None
    for row in report["rows"]:
        s = row["summary"]["delta_sp"]
        click.echo(f"{row['strategy']:>10}: dSP {s['mean']:.4f}+-{s['std']:.4f}")


BOUND_FLAGS = {k: ("sweep", k) for k in ("n_min", "n_max", "d", "weight_scale", "edge_p")}
BOUND_FLAGS.update({"seeds": (None, "seeds"), "seed_start": (None, "seed_start"),
                    "out": (None, "out_dir")})


@main.command("check-bounds")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--set", "sets", multiple=True, metavar="SECTION.KEY=VALUE")
@click.option("--seeds", type=int, help="Number of random instances (default 200).")
@click.option("--seed-start", type=int)
@click.option("--n-min", type=int)
@click.option("--n-max", type=int)
@click.option("--d", type=int)
@click.option("--weight-scale", type=float)
@click.option("--edge-p", type=float)
@click.option("--bound", "bounds", multiple=True,
              type=click.Choice(["theorem1", "lemma1", "theorem2"]))
@click.option("--out", type=click.Path(file_okay=False))
def check_bounds_cmd(config_path, sets, bounds, **flags):
    """Check the similarity bounds on random instances; exit 1 on any violation."""
    data = merged_config(config_path, sets, flags, BOUND_FLAGS)
    sweep_kw = dict(data.get("sweep", {}))
    if bounds:
        sweep_kw["bounds"] = tuple(bounds)
    if "clusters" in sweep_kw:
        sweep_kw["clusters"] = tuple(sweep_kw["clusters"])
    try:
        scfg = SweepConfig(**sweep_kw)
    except TypeError as exc:
        raise click.UsageError(str(exc)) from None
    seeds = range(data.get("seed_start", 0), data.get("seed_start", 0) + data.get("seeds", 200))
    result = sweep(scfg, seeds)
    counts = {b: {"checked": t, "violations": v} for b, (t, v) in sorted(result.counts().items())}
    report = {"kind": "bounds", "config": {"sweep": asdict(scfg), "seeds": list(seeds)},
              "counts": counts, "reports": result.reports,
              "violations": [{"report": r, "instance": inst} for r, inst in result.violations]}
    path = save_report(report, Path(data.get("out_dir", "runs")) / "bounds.json")
    for b, c in counts.items():
        click.echo(f"{b}: {c['violations']} violations in {c['checked']} instances")
    click.echo(f"wrote {path}")
    if result.violations:
        sys.exit(1)


TIMING_FLAGS = {k: (None, k) for k in ("n", "d_in", "hidden", "repeats", "seed")}
TIMING_FLAGS["out"] = (None, "out_dir")


@main.command("timing")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--set", "sets", multiple=True, metavar="KEY=VALUE")
@click.option("--n", type=int)
@click.option("--d-in", type=int)
@click.option("--hidden", type=int)
@click.option("--clusters", "cluster_counts", multiple=True, type=int,
              help="Cluster counts (repeatable); default 4 8 16 32.")
@click.option("--repeats", type=int)
@click.option("--seed", type=int)
@click.option("--out", type=click.Path(file_okay=False))
def timing_cmd(config_path, sets, cluster_counts, **flags):
    """Attention cost against cluster count."""
    data = merged_config(config_path, sets, flags, TIMING_FLAGS)
    if cluster_counts:
        data["cluster_counts"] = cluster_counts
    try:
        tcfg = TimingConfig(**data)
    except (TypeError, ValueError) as exc:
        raise click.UsageError(str(exc)) from None
    report, wall = run_timing(tcfg)
    secs = {r["c"]: r["seconds"] for r in wall["rows"]}
    for row in report["rows"]:
        label = "none" if row["c"] is None else row["c"]
        click.echo(f"c={label}: flops {row['flops']}  {secs[row['c']] * 1e3:.2f} ms/epoch")
    click.echo(f"fitted exponent {wall['beta']:.3f}; c=1 / unpartitioned {wall['c1_over_unpartitioned']:.3f}")


GEN_FLAGS = {k: (None, k) for k in ("n", "blocks", "hub_fraction", "hub_skew", "label_bias", "seed")}


@main.command("generate")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--set", "sets", multiple=True, metavar="KEY=VALUE")
@click.option("--n", type=int)
@click.option("--blocks", type=int)
@click.option("--hub-fraction", type=float)
@click.option("--hub-skew", type=float)
@click.option("--label-bias", type=float)
@click.option("--seed", type=int)
@click.option("--out", type=click.Path(file_okay=False), default="data", show_default=True)
def generate_cmd(config_path, sets, out, **flags):
    """Write a synthetic graph as edges.txt and features.csv."""
    data = merged_config(config_path, sets, flags, GEN_FLAGS)
    data = data.get("synthetic", data)
    if isinstance(data.get("sensitive_skew"), list):
        data["sensitive_skew"] = tuple(data["sensitive_skew"])
    try:
        cfg = SyntheticConfig(**data)
        g = generate_synthetic(cfg)
    except (TypeError, ValueError) as exc:
        raise click.UsageError(str(exc)) from None
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    save_graph(g, out / "edges.txt", out / "features.csv")
    save_report({"kind": "synthetic", "config": asdict(cfg), "n": g.n, "edges": g.num_edges},
                out / "synthetic.json")
    click.echo(f"wrote {g.n} nodes, {g.num_edges} edges to {out}")


@main.command("verify")
@click.option("--only", multiple=True, type=int, help="Criterion numbers to run (repeatable).")
@click.option("--quick", is_flag=True, help="Reduced seeds for the training criteria.")
@click.option("--out", type=click.Path(file_okay=False), default="runs", show_default=True)
def verify_cmd(only, quick, out):
    """Run the acceptance suite end to end; exit 1 if any criterion fails."""
    from .acceptance import run_all
    results = run_all(only or None, quick=quick, echo=click.echo)
    report = {"kind": "verify", "config": {"only": list(only), "quick": quick},
              "criteria": [r.to_report() for r in results]}
    path = save_report(report, Path(out) / "verify.json")
    save_report({"kind": "verify_wallclock", "criteria": [{"number": r.number, **r.wall} for r in results]},
                Path(out) / "verify-wallclock.json")
    passed = sum(r.passed for r in results)
    click.echo(f"{passed}/{len(results)} criteria passed; wrote {path}")
    if passed != len(results):
        sys.exit(1)


if __name__ == "__main__":
    main()
