import numpy as np
import pytest

from rembed.config import SolverConfig
from rembed.core.matcore import DenseMatrix, SparseMatrix
from rembed.core.rembrandt import Dataset, make_gapped_instance

# lambda = 0 reproduces the unregularized objective exactly
EXACT_SOLVER = SolverConfig(ridge_lambda=0.0)


def random_sparse(rng: np.random.Generator, rows: int, cols: int, density: float) -> SparseMatrix:
    mask = rng.random((rows, cols)) < density
    return SparseMatrix.from_dense(np.where(mask, rng.standard_normal((rows, cols)), 0.0))


def random_dense(rng: np.random.Generator, rows: int, cols: int) -> DenseMatrix:
    return DenseMatrix(rng.standard_normal((rows, cols)))


def full_rank_dataset(rng: np.random.Generator, n: int, d: int, c: int) -> Dataset:
    """Dense-ish X with full column rank and real-valued labels"""
    X = rng.standard_normal((n, d))
    X[rng.random((n, d)) < 0.3] = 0.0
    X[np.arange(d), np.arange(d)] += 3.0
    Y = np.where(rng.random((n, c)) < 0.4, rng.random((n, c)) + 0.5, 0.0)
    Y[np.arange(n), rng.integers(0, c, n)] = 1.0
    return Dataset(SparseMatrix.from_dense(X), SparseMatrix.from_dense(Y))


def dense_projector(X: SparseMatrix) -> np.ndarray:
    U, s, _ = np.linalg.svd(X.to_dense(), full_matrices=False)
    Ux = U[:, s > 1e-10 * s[0]]
    return Ux @ Ux.T


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def gapped_instances():
    """20 seeded problems (n=40, d=12, c=9) with relative eigengap >= 0.1 after k = 3"""
    return [make_gapped_instance(seed, n=40, d=12, c=9, k=3, min_gap=0.1)[0] for seed in range(20)]
