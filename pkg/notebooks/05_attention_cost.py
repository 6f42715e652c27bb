"""
Attention cost against cluster count
====================================

Count attention FLOPs exactly and time one forward and backward pass for a
range of cluster counts.
"""

# %%
from fairgp.harness import TimingConfig, run_timing

report, wall = run_timing(TimingConfig(n=2048, cluster_counts=(2, 4, 8, 16), repeats=2), write=False)
secs = {r["c"]: r["seconds"] for r in wall["rows"]}
for row in report["rows"]:
    print(f"c={row['c']}: sum |V_p|^2 = {row['sum_sq_sizes']:>9}  flops {row['flops']:>12}  "
          f"largest block {row['max_block_flops']:>11}  {secs[row['c']] * 1e3:7.1f} ms")

# %% Total work halves per doubling of c, each block's work quarters.
print("fitted exponent of time ~ c^-beta:", round(wall["beta"], 3))
