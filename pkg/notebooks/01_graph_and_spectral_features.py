"""
Graphs and spectral features
============================

Build a small graph, look at its degree profile and fuse the top adjacency
eigenvectors into the node features.
"""

# %%
import numpy as np

from fairgp.data import SyntheticConfig, generate_synthetic
from fairgp.graph import build_graph, default_degree_threshold, higher_order_nodes
from fairgp.spectral import fuse_features, top_eigenpairs

# %% A path on three nodes: duplicate and self-loop edges are dropped.
g = build_graph([(0, 1), (1, 0), (1, 2), (2, 2)], np.eye(3), [0, 1, 0], [0, 1, 1])
print("edges", g.edge_array().tolist(), "degrees", g.degrees.tolist())

# %% Its spectrum is known in closed form: sqrt(2), 0, -sqrt(2).
eig = top_eigenpairs(g, 3)
print("eigenvalues", np.round(eig.values, 12))

# %% On the synthetic benchmark the top eigenvectors concentrate on hubs.
big = generate_synthetic(SyntheticConfig(seed=0))
threshold = default_degree_threshold(big)
hubs = higher_order_nodes(big, threshold)
eig = top_eigenpairs(big, 3)
mass = (eig.vectors[hubs] ** 2).sum(axis=0)
print(f"{hubs.size} higher-order nodes (degree > {threshold:.0f}) hold "
      f"{np.round(mass, 3)} of each eigenvector's squared mass")

# %% Fused features keep the raw block untouched and append standardized eigenvectors.
X = fuse_features(big, eig)
print("fused shape", X.shape, "raw block unchanged:", np.array_equal(X[:, :big.features.shape[1]], big.features))
