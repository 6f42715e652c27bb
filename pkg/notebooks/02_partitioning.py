"""
Partitioning strategies
=======================

Compare the multilevel, Louvain and random partitioners on edge cut and
balance, and watch multilevel refinement lower the cut pass by pass.
"""

# %%
import numpy as np

from fairgp.data import SyntheticConfig, generate_synthetic
from fairgp.partition import make_partition, partition_multilevel, quality

g = generate_synthetic(SyntheticConfig(seed=1))

# %% Edge cut and balance for each strategy at c=16.
for strategy in ("multilevel", "louvain", "random"):
    p = make_partition(g, strategy, 16, seed=0)
    q = quality(g, p)
    print(f"{strategy:>10}: cut {q.edge_cut:5d} of {g.num_edges}, balance {q.balance:.3f}")

# %% Refinement history: (level, pass, cut before, cut after), finest level last.
p = partition_multilevel(g, 16)
for level, step, before, after in p.history[-6:]:
    print(f"level {level} pass {step}: {before} -> {after}")

# %% A tolerance too tight for the node count is flagged instead of silently violated.
tight = partition_multilevel(g, 3, balance_eps=0.0)
print("2000 nodes in 3 exact parts feasible?", tight.balance_feasible, "sizes", tight.sizes.tolist())
