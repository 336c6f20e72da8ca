import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.linalg import subspace_angles

from rembed.config import SolverConfig
from rembed.core.linsolve import (
    orthogonalize,
    resolve_ridge,
    ridge_gradient,
    ridge_lstsq,
    ridge_objective,
    sym_eig_topk,
)
from rembed.core.matcore import DenseMatrix, SparseMatrix
from rembed.errors import ConvergenceError, DimensionError, InvalidInputError

from .conftest import EXACT_SOLVER, random_dense, random_sparse


def solve_allowing_limit(X, B, cfg):
    try:
        return ridge_lstsq(X, B, cfg)
    except ConvergenceError as e:
        return e.solution


def relative_error(actual: np.ndarray, expected: np.ndarray) -> float:
    return float(np.linalg.norm(actual - expected) / np.linalg.norm(expected))


class TestRidgeLstsq:
    def test_identity_design(self, rng):
        B = random_dense(rng, 5, 3)
        Z = ridge_lstsq(SparseMatrix.identity(5), B, EXACT_SOLVER)
        assert_allclose(Z.array, B.array, rtol=0, atol=1e-10)

    def test_scaled_identity(self, rng):
        B = random_dense(rng, 6, 2)
        Z = ridge_lstsq(SparseMatrix.identity(6, scale=2.0), B, EXACT_SOLVER)
        assert_allclose(Z.array, B.array / 2.0, rtol=0, atol=1e-10)

    def test_matches_normal_equations(self, rng):
        X = random_sparse(rng, 40, 8, 0.5)
        B = random_dense(rng, 40, 3)
        lam = 1e-3
        Z = ridge_lstsq(X, B, SolverConfig(ridge_lambda=lam))
        Xd = X.to_dense()
        expected = np.linalg.solve(Xd.T @ Xd + lam * np.eye(8), Xd.T @ B.array)
        assert relative_error(Z.array, expected) < 1e-8

    @pytest.mark.parametrize("lam", [0.0, 1e-4, 1.0])
    def test_gradient_contract(self, rng, lam):
        X = random_sparse(rng, 60, 15, 0.3)
        B = random_dense(rng, 60, 4)
        cfg = SolverConfig(ridge_lambda=lam)
        Z = ridge_lstsq(X, B, cfg)
        grad = np.linalg.norm(ridge_gradient(X, B, Z, lam))
        assert grad <= cfg.tol * np.linalg.norm(X.csr.T @ B.array)

    def test_rank_deficient_design_gives_minimum_norm(self, rng):
        base = rng.standard_normal((30, 4))
        X = SparseMatrix.from_dense(np.hstack([base, base[:, :1]]))
        B = random_dense(rng, 30, 2)
        Z = ridge_lstsq(X, B, EXACT_SOLVER)
        expected = np.linalg.pinv(X.to_dense()) @ B.array
        assert relative_error(Z.array, expected) < 1e-6

    def test_zero_right_hand_side(self):
        X = SparseMatrix.from_dense([[1.0, 0.0], [0.0, 2.0], [1.0, 1.0]])
        Z = ridge_lstsq(X, DenseMatrix.zeros(3, 2), EXACT_SOLVER)
        assert not Z.array.any()

    def test_dimension_mismatch(self, rng):
        with pytest.raises(DimensionError):
            ridge_lstsq(SparseMatrix.identity(4), random_dense(rng, 5, 1), EXACT_SOLVER)

    def test_iteration_limit_reports_residual(self, rng):
        X = random_sparse(rng, 80, 30, 0.4)
        B = random_dense(rng, 80, 2)
        with pytest.raises(ConvergenceError) as excinfo:
            ridge_lstsq(X, B, SolverConfig(ridge_lambda=0.0, max_iters=2))
        err = excinfo.value
        assert err.residual > 0.0
        assert err.solution.shape == (30, 2)
        assert err.exit_code == 4

    def test_more_iterations_never_increase_objective(self, rng):
        X = random_sparse(rng, 80, 30, 0.4)
        B = random_dense(rng, 80, 2)
        lam = 1e-3
        objectives = [
            ridge_objective(X, B, solve_allowing_limit(X, B, SolverConfig(ridge_lambda=lam, max_iters=m)), lam)
            for m in (1, 2, 4, 8, 16, 64, 1000)
        ]
        for before, after in zip(objectives, objectives[1:]):
            assert after <= before + 1e-12 * max(1.0, before)

    def test_default_lambda_scales_with_data(self):
        X = SparseMatrix.from_dense([[3.0, 4.0], [0.0, 0.0]])
        assert resolve_ridge(X, SolverConfig()) == pytest.approx(1e-6 * 25.0 / 2)
        assert resolve_ridge(X, SolverConfig(ridge_lambda=0.5)) == 0.5


class TestOrthogonalize:
    def test_orthonormal_input_keeps_span(self, rng):
        M = DenseMatrix(np.linalg.qr(rng.standard_normal((10, 4)))[0])
        Q = orthogonalize(M)
        assert_allclose(Q.array.T @ Q.array, np.eye(4), atol=1e-10)
        assert np.max(subspace_angles(Q.array, M.array)) < 1e-10

    def test_axis_aligned_columns(self):
        Q = orthogonalize(DenseMatrix([[3.0, 0.0], [0.0, 4.0], [0.0, 0.0]]))
        assert_allclose(np.abs(Q.array), [[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]], atol=1e-15)

    def test_duplicate_columns_collapse(self, rng):
        v = rng.standard_normal(3)
        Q = orthogonalize(DenseMatrix(np.column_stack([v, v])))
        assert Q.cols == 1
        assert np.linalg.matrix_rank(np.column_stack([v, v])) == 1

    def test_all_zero_input(self):
        Q = orthogonalize(DenseMatrix.zeros(4, 3))
        assert Q.shape == (4, 0)

    def test_span_preserved(self, rng):
        M = random_dense(rng, 20, 6)
        Q = orthogonalize(M).array
        assert relative_error(Q @ (Q.T @ M.array), M.array) < 1e-8

    def test_empty_input(self):
        with pytest.raises(DimensionError):
            orthogonalize(DenseMatrix(np.zeros((3, 0))))


class TestSymEigTopk:
    def test_diagonal(self):
        result = sym_eig_topk(DenseMatrix(np.diag([4.0, 1.0, 0.0])), 2)
        assert_allclose(result.values, [4.0, 1.0])
        assert_allclose(np.abs(result.vectors.array), [[1, 0], [0, 1], [0, 0]], atol=1e-15)

    def test_two_by_two(self):
        result = sym_eig_topk(DenseMatrix([[2.0, 1.0], [1.0, 2.0]]), 2)
        assert_allclose(result.values, [3.0, 1.0], atol=1e-14)
        s = 1.0 / np.sqrt(2.0)
        assert_allclose(np.abs(result.vectors.array), [[s, s], [s, s]], atol=1e-14)
        assert result.vectors.array[0, 0] * result.vectors.array[1, 0] > 0
        assert result.vectors.array[0, 1] * result.vectors.array[1, 1] < 0

    def test_random_psd_residuals(self, rng):
        A = rng.standard_normal((25, 30))
        F = A @ A.T
        result = sym_eig_topk(DenseMatrix(F), 5)
        V = result.vectors.array
        for i in range(5):
            assert np.linalg.norm(F @ V[:, i] - result.values[i] * V[:, i]) < 1e-8
        assert_allclose(V.T @ V, np.eye(5), atol=1e-10)
        assert np.all(np.diff(result.values) <= 0)

    def test_psd_raw_values_are_not_negative(self, rng):
        A = rng.standard_normal((8, 3))
        result = sym_eig_topk(DenseMatrix(A @ A.T), 8)
        assert np.all(result.raw_values >= -1e-10 * result.raw_values[0])
        assert np.all(result.values >= 0.0)

    def test_sign_normalization(self, rng):
        A = rng.standard_normal((6, 6))
        V = sym_eig_topk(DenseMatrix(A + A.T), 6).vectors.array
        pivots = np.argmax(np.abs(V), axis=0)
        assert np.all(V[pivots, np.arange(6)] > 0)

    def test_asymmetric_input(self):
        with pytest.raises(InvalidInputError):
            sym_eig_topk(DenseMatrix([[1.0, 0.1], [0.0, 1.0]]), 1)

    def test_k_above_size(self):
        with pytest.raises(DimensionError):
            sym_eig_topk(DenseMatrix(np.eye(2)), 3)
