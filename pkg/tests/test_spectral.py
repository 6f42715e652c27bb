import numpy as np
import pytest

from fairgp.acceptance import jacobi_eigh
from fairgp.spectral import EigenResult, fuse_features, standardize_columns, top_eigenpairs

from conftest import er_graph, make_graph


class TestJacobiOracle:
    def test_matches_lapack(self):
        rng = np.random.default_rng(0)
        M = rng.normal(size=(9, 9))
        M = M + M.T
        vals, vecs = jacobi_eigh(M)
        np.testing.assert_allclose(vals, np.sort(np.linalg.eigvalsh(M))[::-1], atol=1e-12)
        np.testing.assert_allclose(M @ vecs, vecs * vals, atol=1e-11)


class TestTopEigenpairs:
    def test_k2(self):
        eig = top_eigenpairs(make_graph([(0, 1)], 2), 1)
        np.testing.assert_allclose(eig.values, [1.0], atol=1e-12)
        np.testing.assert_allclose(np.abs(eig.vectors[:, 0]), [2 ** -0.5] * 2, atol=1e-10)

    def test_path3(self, path3):
        eig = top_eigenpairs(path3, 3)
        np.testing.assert_allclose(eig.values, [np.sqrt(2), 0.0, -np.sqrt(2)], atol=1e-10)

    def test_trace(self):
        g = er_graph(np.random.default_rng(1), 10, 0.4)
        assert abs(top_eigenpairs(g, 10).values.sum()) < 1e-9

    def test_degenerate_subspace(self, two_k4):
        eig = top_eigenpairs(two_k4, 2)
        np.testing.assert_allclose(eig.values, [3.0, 3.0], atol=1e-10)
        P = eig.vectors @ eig.vectors.T
        comp = np.zeros((8, 2))
        comp[:4, 0] = comp[4:, 1] = 0.5
        np.testing.assert_allclose(P, comp @ comp.T, atol=1e-8)

    def test_residual_and_orthogonality(self):
        g = er_graph(np.random.default_rng(3), 300, 0.03)
        eig = top_eigenpairs(g, 4, tol=1e-10)
        A = g.adjacency()
        for k in range(4):
            r = np.linalg.norm(A @ eig.vectors[:, k] - eig.values[k] * eig.vectors[:, k])
            assert r <= 1e-10 * max(1.0, abs(eig.values[k]))
        np.testing.assert_allclose(eig.vectors.T @ eig.vectors, np.eye(4), atol=1e-10)

    @pytest.mark.parametrize("seed", range(15))
    def test_against_oracle(self, seed):
        rng = np.random.default_rng(100 + seed)
        n = int(rng.integers(2, 13))
        g = er_graph(rng, n, 0.5)
        vals, _ = jacobi_eigh(g.adjacency().toarray())
        eig = top_eigenpairs(g, n)
        np.testing.assert_allclose(eig.values, vals, atol=1e-8)

    def test_t_zero(self, path3):
        assert top_eigenpairs(path3, 0).t == 0

    def test_t_too_large(self, path3):
        with pytest.raises(ValueError):
            top_eigenpairs(path3, 4)


class TestFuse:
    def _eig(self, n, t, rng):
        return EigenResult(np.arange(t, dtype=float), rng.normal(size=(n, t)), np.zeros(t), 1)

    def test_concatenation(self):
        rng = np.random.default_rng(0)
        H = rng.normal(size=(3, 2))
        g = make_graph([(0, 1)], 3, features=H)
        out = fuse_features(g, self._eig(3, 1, rng))
        assert out.shape == (3, 3)
        assert np.array_equal(out[:, :2], H)

    def test_t_zero_identity(self, path3):
        eig = top_eigenpairs(path3, 0)
        assert np.array_equal(fuse_features(path3, eig), path3.features)

    def test_zero_features(self):
        rng = np.random.default_rng(1)
        g = make_graph([(0, 1)], 4, d=3)
        eig = self._eig(4, 2, rng)
        out = fuse_features(g, eig, standardize=False)
        assert np.all(out[:, :3] == 0)
        np.testing.assert_array_equal(out[:, 3:], eig.vectors)

    def test_standardized(self):
        S = standardize_columns(np.random.default_rng(2).normal(size=(50, 3)) * 7 + 2)
        np.testing.assert_allclose(S.mean(axis=0), 0, atol=1e-12)
        np.testing.assert_allclose(S.std(axis=0), 1, atol=1e-12)
