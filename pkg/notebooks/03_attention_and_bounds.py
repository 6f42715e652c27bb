"""
Attention and the similarity bounds
===================================

Masked attention keeps every row stochastic and zeroes cross-cluster
entries. The sensitive similarity ||s - A s|| then obeys the cross-group
mass bound and the sqrt(n) bound. The partition approximation bound is
checked too, and it does not always hold.
"""

# %%
import numpy as np

from fairgp.attention import AttentionParams, attention_scores, masked_attention_scores
from fairgp.partition import from_assignment
from fairgp.theory import SweepConfig, check_lemma1, check_theorem1, sweep

rng = np.random.default_rng(0)
X = rng.normal(size=(8, 4))
params = AttentionParams(*(rng.normal(size=(4, 4)) for _ in range(3)))
part = from_assignment([0, 0, 1, 1, 2, 2, 3, 3])
s = np.array([1, 0, 1, 1, 0, 0, 1, 0])

# %%
full = attention_scores(X, params)
masked = masked_attention_scores(X, params, part)
print("row sums", np.round(masked.matrix.sum(axis=1), 12))
for name, A in (("full", full), ("masked", masked)):
    t1, l1 = check_theorem1(A, s), check_lemma1(A, s)
    print(f"{name:>6}: ||s - As|| = {t1.lhs:.4f}, cross-group mass {t1.rhs:.4f}, sqrt(n) {l1.rhs:.4f}")

# %% Random sweeps: the first two bounds never fail; the third fails on a sizeable share.
result = sweep(SweepConfig(n_min=8), range(100))
for bound, (total, bad) in sorted(result.counts().items()):
    print(f"{bound}: {bad} violations in {total}")
report, instance = result.violations[0]
print("example violation margin", round(report.margin, 4), "on n =", instance["n"])
print("per-pair reading satisfied on", report.details["pairs_satisfied"], "of", report.details["pairs_total"], "pairs")
