"""
Linear-algebra kernels used by the range finder: ridge least squares on a
sparse design, rank-revealing orthogonalization, and the small symmetric
eigensolve.
"""
import logging
import math
from dataclasses import dataclass
from typing import Union

import numpy as np
import scipy.linalg as la
from scipy.sparse.linalg import LinearOperator, cg, lsqr

from ..config import DROP_TOL, POLISH_ROUNDS, RIDGE_SCALE, SYMMETRY_TOL, SolverConfig
from ..errors import ConvergenceError, DimensionError, InvalidInputError
from .matcore import DenseMatrix, SparseMatrix

logger = logging.getLogger(__name__)

LSQR_ITERATION_LIMIT = 7  # lsqr istop code for "iter_lim reached"


@dataclass(frozen=True)
class EigResult:
    vectors: DenseMatrix
    values: np.ndarray  # nonincreasing, negatives clamped to 0
    raw_values: np.ndarray  # same order, before clamping


def resolve_ridge(X: Union[SparseMatrix, DenseMatrix], cfg: SolverConfig) -> float:
    """Explicit lambda from cfg, or RIDGE_SCALE times the mean squared row norm of X"""
    if cfg.ridge_lambda is not None:
        return float(cfg.ridge_lambda)
    if X.rows == 0:
        return 0.0
    return RIDGE_SCALE * float(np.dot(X.values, X.values)) / X.rows


def ridge_gradient(X: SparseMatrix, B: DenseMatrix, Z: DenseMatrix, lam: float) -> np.ndarray:
    """X^T (X Z - B) + lam Z"""
    residual = X.csr @ Z.array - B.array
    return X.csr.T @ residual + lam * Z.array


def ridge_objective(X: SparseMatrix, B: DenseMatrix, Z: DenseMatrix, lam: float) -> float:
    residual = X.csr @ Z.array - B.array
    return float(np.sum(residual * residual) + lam * np.sum(Z.array * Z.array))


def _normal_operator(X: SparseMatrix, lam: float) -> LinearOperator:
    csr = X.csr
    return LinearOperator(
        (X.cols, X.cols),
        matvec=lambda v: csr.T @ (csr @ v) + lam * v,
        dtype=np.float64,
    )


def ridge_lstsq(X: SparseMatrix, B: DenseMatrix, cfg: SolverConfig) -> DenseMatrix:
    """
    Minimize ||B - X Z||_F^2 + lam ||Z||_F^2 one column at a time.

    Each column runs LSQR with damping sqrt(lam) from zero, so on a
    rank-deficient X with lam = 0 it lands on the minimum-norm solution.
    LSQR's atol is scaled so that its normal-residual stopping test implies
        ||X^T (X z - b) + lam z|| <= tol * ||X^T b||
    for that column, which summed over columns is the Frobenius contract.
    Columns that stop early for another reason are polished with CG on the
    implicit operator X^T X + lam I.
    """
    if X.rows != B.rows:
        raise DimensionError(f"ridge_lstsq: X has {X.rows} rows but B has {B.rows}")
    lam = resolve_ridge(X, cfg)
    csr = X.csr
    damp = math.sqrt(lam)
    rhs = csr.T @ B.array
    rhs_norms = np.linalg.norm(rhs, axis=0)
    b_norms = np.linalg.norm(B.array, axis=0)
    augmented_norm = math.sqrt(float(np.dot(X.values, X.values)) + lam * X.cols)

    Z = np.zeros((X.cols, B.cols))
    normal_op = None
    hit_limit = []
    for j in range(B.cols):
        if rhs_norms[j] == 0.0:
            continue
        atol = cfg.tol * rhs_norms[j] / (augmented_norm * b_norms[j])
        result = lsqr(
            csr, B.array[:, j], damp=damp, atol=atol, btol=0.0, conlim=0.0, iter_lim=cfg.max_iters
        )
        z, istop, iters = result[0], result[1], result[2]
        Z[:, j] = z
        if istop == LSQR_ITERATION_LIMIT:
            hit_limit.append(j)
            continue

        target = cfg.tol * rhs_norms[j]
        gap = np.linalg.norm(csr.T @ (csr @ z) + lam * z - rhs[:, j])
        rounds = 0
        while gap > target and rounds < POLISH_ROUNDS:
            if normal_op is None:
                normal_op = _normal_operator(X, lam)
            z, _ = cg(normal_op, rhs[:, j], x0=z, rtol=cfg.tol, atol=0.0, maxiter=cfg.max_iters)
            gap = np.linalg.norm(csr.T @ (csr @ z) + lam * z - rhs[:, j])
            rounds += 1
        Z[:, j] = z
        logger.debug(f"ridge_lstsq column {j}: lsqr istop={istop} iters={iters} polish_rounds={rounds}")

    solution = DenseMatrix(Z)
    grad_norm = float(np.linalg.norm(ridge_gradient(X, B, solution, lam)))
    bound = cfg.tol * float(np.linalg.norm(rhs))
    if hit_limit or grad_norm > bound:
        raise ConvergenceError(
            f"ridge_lstsq did not converge in {cfg.max_iters} iterations "
            f"(gradient norm {grad_norm:.3e} > {bound:.3e}, columns at limit: {hit_limit})",
            residual=grad_norm,
            solution=solution,
        )
    return solution


def orthogonalize(M: DenseMatrix) -> DenseMatrix:
    """
    Orthonormal basis for the column space of M.

    Householder QR with column pivoting (LAPACK geqp3). Pivoted columns whose
    residual norm |R_ii| falls below DROP_TOL * |R_00| (the largest column
    norm) are dropped; survivors are returned in their original column order.
    An all-zero M gives a result with no columns.
    """
    if M.rows < 1 or M.cols < 1:
        raise DimensionError(f"orthogonalize needs a nonempty matrix, got {M.rows}x{M.cols}")
    Q, R, piv = la.qr(M.array, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag.size == 0 or diag[0] == 0.0:
        return DenseMatrix(np.zeros((M.rows, 0)))
    rank = int(np.count_nonzero(diag > DROP_TOL * diag[0]))
    if rank < M.cols:
        logger.debug(f"orthogonalize dropped {M.cols - rank} dependent column(s)")
    order = np.argsort(piv[:rank], kind="stable")
    return DenseMatrix(Q[:, :rank][:, order])


def sym_eig_topk(F: DenseMatrix, k: int) -> EigResult:
    """
    Top-k eigenpairs of a small symmetric matrix.

    Full dense solve by tridiagonal reduction and implicit QR iteration
    (LAPACK syev), then truncation. Each eigenvector's sign is fixed so its
    largest-magnitude entry is positive.
    """
    if F.rows != F.cols:
        raise DimensionError(f"sym_eig_topk needs a square matrix, got {F.rows}x{F.cols}")
    if k < 1 or k > F.rows:
        raise DimensionError(f"k = {k} outside [1, {F.rows}]")
    A = F.array
    scale = max(1.0, float(np.max(np.abs(A))))
    asymmetry = float(np.max(np.abs(A - A.T)))
    if asymmetry > SYMMETRY_TOL * scale:
        raise InvalidInputError(f"matrix is not symmetric (max asymmetry {asymmetry:.3e})")
    values, vectors = la.eigh(0.5 * (A + A.T), driver="ev")
    values = values[::-1][:k]
    vectors = vectors[:, ::-1][:, :k]
    pivots = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[pivots, np.arange(k)])
    signs[signs == 0] = 1.0
    vectors = vectors * signs
    return EigResult(vectors=DenseMatrix(vectors), values=np.maximum(values, 0.0), raw_values=values.copy())
