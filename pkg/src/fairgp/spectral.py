"""Top adjacency eigenpairs and the structure-feature fusion ``H' = H || S``.

The eigensolver is a block Lanczos iteration with full reorthogonalization.
A block (rather than a single start vector) is used so that repeated
eigenvalues, which are common in adjacency spectra of graphs with symmetric
or disconnected pieces, are resolved with their full multiplicity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import Graph


class EigenConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class EigenResult:
    values: np.ndarray       # (t,), descending
    vectors: np.ndarray      # (n, t), unit columns
    residuals: np.ndarray    # (t,), ||A x - lambda x||
    iterations: int

    @property
    def t(self) -> int:
        return self.values.size


def _orthonormalize(block, basis, rng, drop_tol=1e-10):
    """Orthonormalize ``block`` against ``basis`` and itself.

    Columns that collapse (the Krylov space became invariant) are replaced by
    fresh random directions so the iteration keeps exploring. Returns ``None``
    once the basis already spans the whole space.
    """
    n = block.shape[0]
    room = n - basis.shape[1]
    if room <= 0:
        return None
    block = block[:, :room].copy()
    out = []
    for j in range(block.shape[1]):
        v = block[:, j]
        for attempt in range(3):
            scale = np.linalg.norm(v)
            for _ in range(2):
                if basis.shape[1]:
                    v = v - basis @ (basis.T @ v)
                for w in out:
                    v = v - w * (w @ v)
            norm = np.linalg.norm(v)
            if scale > 0 and norm > drop_tol * scale:
                out.append(v / norm)
                break
            v = rng.standard_normal(n)
        else:
            break
    if not out:
        return None
    return np.stack(out, axis=1)


def _fix_signs(vectors, rel_tol=1e-10):
    vectors = vectors.copy()
    for k in range(vectors.shape[1]):
        col = vectors[:, k]
        big = np.abs(col) > rel_tol * np.abs(col).max()
        if big.any() and col[np.argmax(big)] < 0:
            vectors[:, k] = -col
    return vectors


def top_eigenpairs(g: Graph, t: int, tol: float = 1e-10, max_iter: int = 300,
                   seed: int = 0, block_size: int | None = None) -> EigenResult:
    """Algebraically largest ``t`` eigenpairs of the adjacency matrix of ``g``.

    ``max_iter`` bounds the number of block expansions of the Krylov basis.
    Each returned pair satisfies ``||A x - lam x|| <= tol * max(1, |lam|)``;
    the first entry of each eigenvector with non-negligible magnitude is
    positive. ``t = 0`` returns an empty result.
    """
    n = g.n
    if t < 0 or t > n:
        raise ValueError(f"t must lie in 0..{n}, got {t}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if t == 0:
        return EigenResult(np.zeros(0), np.zeros((n, 0)), np.zeros(0), 0)

    A = g.adjacency()
    rng = np.random.default_rng(seed)
    b = min(n, block_size or max(t, 2))

    basis = np.zeros((n, 0))
    a_basis = np.zeros((n, 0))
    proj = np.zeros((0, 0))
    block = rng.standard_normal((n, b))
    residual = np.inf
    for it in range(1, max_iter + 1):
        block = _orthonormalize(block, basis, rng)
        if block is None:
            break
        a_block = np.asarray(A @ block)
        cross = basis.T @ a_block
        diag = block.T @ a_block
        diag = 0.5 * (diag + diag.T)
        m = proj.shape[0]
        grown = np.zeros((m + block.shape[1], m + block.shape[1]))
        grown[:m, :m] = proj
        grown[:m, m:] = cross
        grown[m:, :m] = cross.T
        grown[m:, m:] = diag
        proj = grown
        basis = np.hstack([basis, block])
        a_basis = np.hstack([a_basis, a_block])

        if basis.shape[1] < t:
            block = a_block
            continue
        theta, y = np.linalg.eigh(proj)
        order = np.argsort(-theta, kind="stable")[:t]
        theta, y = theta[order], y[:, order]
        x = basis @ y
        res = np.linalg.norm(a_basis @ y - x * theta, axis=0)
        ok = res <= tol * np.maximum(1.0, np.abs(theta))
        residual = float(np.max(res / np.maximum(1.0, np.abs(theta))))
        if ok.all() or basis.shape[1] == n:
            break
        block = a_block
    else:
        raise EigenConvergenceError(
            f"top-{t} eigenpairs did not converge in {max_iter} iterations "
            f"(relative residual {residual:.3e})", residual)

    theta, y = np.linalg.eigh(proj)
    order = np.argsort(-theta, kind="stable")[:t]
    theta, y = theta[order], y[:, order]
    x = basis @ y
    res = np.linalg.norm(a_basis @ y - x * theta, axis=0)
    x = x / np.linalg.norm(x, axis=0)
    return EigenResult(theta, _fix_signs(x), res, it)


def standardize_columns(m: np.ndarray) -> np.ndarray:
    """Zero-mean, unit-variance columns; constant columns become zero."""
    mu = m.mean(axis=0)
    sd = m.std(axis=0)
    safe = np.where(sd > 1e-12, sd, 1.0)
    return np.where(sd > 1e-12, (m - mu) / safe, 0.0)


def fuse_features(g: Graph, eig: EigenResult, standardize: bool = True) -> np.ndarray:
    """Concatenate node features with the structure matrix: ``H' = H || S``.

    With ``standardize`` the eigenvector columns are rescaled to unit variance
    first; unit-norm eigenvectors would otherwise be O(1/sqrt(n)) next to the
    raw features. The first ``d`` columns are always a bitwise copy of ``H``.
    """
    s = np.asarray(eig.vectors, dtype=np.float64)
    if s.shape[0] != g.n:
        raise ValueError(f"eigenvectors have {s.shape[0]} rows, graph has {g.n} nodes")
    if standardize and s.shape[1]:
        s = standardize_columns(s)
    return np.hstack([g.features, s])
