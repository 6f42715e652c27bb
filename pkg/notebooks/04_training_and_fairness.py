"""
Training and fairness on the synthetic benchmark
================================================

Train the model with and without partition masking on a few seeds of the
hub-skewed synthetic graph and compare accuracy and parity gaps.
"""

# %%
from fairgp.data import SyntheticConfig
from fairgp.harness import RunConfig, run_variants
from fairgp.model import PartitionConfig, TrainConfig

cfg = RunConfig(synthetic=SyntheticConfig(), partition=PartitionConfig(clusters=16), repeat=3)
variants = {
    "masked": (TrainConfig(), cfg.partition),
    "unpartitioned": (TrainConfig(no_gp=True), cfg.partition),
}
records = run_variants(cfg, variants)

# %%
for name, runs in records.items():
    for r in runs:
        m, t = r["metrics"], r["proportions"]
        print(f"{name:>14} seed {r['seed']}: acc {m['acc']:.3f}  dSP {m['delta_sp']:.3f}  "
              f"dEO {m['delta_eo']:.3f}  positive-rate ratio {t['prediction'][0]:.2f}")
