"""
Label embeddings: the randomized partial-least-squares range finder, the
dense brute-force oracle it is checked against, and the two baseline
embeddings (random Gaussian "compressed sensing" labels, unsupervised PCA
features).
"""
import logging
import time
from dataclasses import dataclass
from typing import Tuple

import numpy as np
import scipy.linalg as la

from ..config import IDEMPOTENCE_TOL, ORACLE_MAX_CELLS, EmbedConfig, SolverConfig
from ..errors import DimensionError, InvalidInputError, OracleRefusedError, RankError
from .linsolve import orthogonalize, ridge_lstsq, sym_eig_topk
from .matcore import DenseMatrix, SeededRng, SparseMatrix, gemm, randn, spmm, spmm_t

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Dataset:
    """Paired features X (n x d) and labels Y (n x c)"""

    X: SparseMatrix
    Y: SparseMatrix

    def __post_init__(self):
        if self.X.rows != self.Y.rows:
            raise DimensionError(f"X has {self.X.rows} rows but Y has {self.Y.rows}")

    @property
    def n(self) -> int:
        return self.X.rows

    @property
    def d(self) -> int:
        return self.X.cols

    @property
    def c(self) -> int:
        return self.Y.cols

    @property
    def avg_label_sparsity(self) -> float:
        return self.Y.nnz / self.n if self.n else 0.0

    def unlabeled_rows(self) -> np.ndarray:
        return np.flatnonzero(self.Y.row_nnz() == 0)

    def take_rows(self, indices) -> "Dataset":
        return Dataset(self.X.take_rows(indices), self.Y.take_rows(indices))

    def with_normalized_labels(self) -> "Dataset":
        """Scale each label row to sum 1; empty rows stay empty"""
        sums = np.asarray(self.Y.csr.sum(axis=1)).ravel()
        factors = np.divide(1.0, sums, out=np.zeros_like(sums), where=sums != 0)
        return Dataset(self.X, self.Y.scale_rows(factors))


@dataclass(frozen=True)
class Embedding:
    """
    Label embedding V (c x k, orthonormal columns) with sigma, the estimated
    eigenvalues of Y^T P Y where P projects onto the column space of X.
    """

    V: DenseMatrix
    sigma: np.ndarray

    def __post_init__(self):
        sigma = np.asarray(self.sigma, dtype=np.float64).ravel()
        if sigma.size != self.V.cols:
            raise DimensionError(f"{sigma.size} sigma values for {self.V.cols} embedding columns")
        if np.any(sigma < 0) or not np.all(np.isfinite(sigma)):
            raise InvalidInputError("sigma values must be finite and nonnegative")
        if np.any(np.diff(sigma) > 1e-12 * max(1.0, float(sigma.max(initial=0.0)))):
            raise InvalidInputError("sigma values must be nonincreasing")
        sigma.flags.writeable = False
        object.__setattr__(self, "sigma", sigma)

    @property
    def c(self) -> int:
        return self.V.rows

    @property
    def k(self) -> int:
        return self.V.cols

    def orthonormality_error(self) -> float:
        gram = self.V.array.T @ self.V.array
        return float(np.max(np.abs(gram - np.eye(self.k)), initial=0.0))


def principal_angles(A, B) -> np.ndarray:
    """Angles (radians, descending) between the column spaces of A and B"""
    a = A.array if isinstance(A, DenseMatrix) else np.asarray(A)
    b = B.array if isinstance(B, DenseMatrix) else np.asarray(B)
    return la.subspace_angles(a, b)


def _labels_for(data: Dataset, cfg: EmbedConfig) -> SparseMatrix:
    return data.with_normalized_labels().Y if cfg.normalize_labels else data.Y


def rembrandt_embed(data: Dataset, cfg: EmbedConfig) -> Embedding:
    """
    Randomized range finder for Y^T P Y, where every product with P is
    replaced by a ridge regression of the labels on X:

        Q <- orth(randn(c, k + p))
        repeat q times:  Z <- argmin ||Y Q - X Z||,  Q <- orth(Y^T X Z)
        Z <- argmin ||Y Q - X Z||,  M <- Y^T X Z,  F <- M^T M
        (V', S^2) <- eig(F, k),  V <- Q V',  sigma <- S

    q + 1 passes over (X, Y) in total.
    """
    if data.n < 1:
        raise InvalidInputError("dataset has no examples")
    if data.c < 1 or data.Y.nnz == 0:
        raise InvalidInputError("label matrix is empty")

    width = cfg.k + cfg.p
    if width > data.c:
        logger.warning(f"k + p = {width} exceeds c = {data.c}; clamping range finder width to {data.c}")
        width = data.c
    if width < cfg.k:
        raise RankError(f"k = {cfg.k} exceeds the number of labels c = {data.c}", achievable_k=data.c)

    X = data.X
    Y = _labels_for(data, cfg)
    rng = SeededRng(cfg.seed)
    Q = orthogonalize(randn(data.c, width, rng))

    start = time.perf_counter()
    for i in range(cfg.q):
        Z = ridge_lstsq(X, spmm(Y, Q), cfg.solver)
        Q = orthogonalize(spmm_t(Y, spmm(X, Z)))
        logger.info(f"pass {i + 1}/{cfg.q + 1}: basis width {Q.cols} ({time.perf_counter() - start:.2f}s)")
        if Q.cols < cfg.k:
            raise RankError(
                f"only {Q.cols} independent label directions survive; requested k = {cfg.k}",
                achievable_k=Q.cols,
            )

    Z = ridge_lstsq(X, spmm(Y, Q), cfg.solver)
    M = spmm_t(Y, spmm(X, Z))
    F = gemm(M, M, transpose_a=True)
    logger.info(f"pass {cfg.q + 1}/{cfg.q + 1}: F is {F.rows}x{F.cols} ({time.perf_counter() - start:.2f}s)")

    eig = sym_eig_topk(F, cfg.k)
    V = gemm(Q, eig.vectors)
    return Embedding(V=V, sigma=np.sqrt(eig.values))


def exact_oracle(data: Dataset, k: int) -> Embedding:
    """
    Top-k right singular space of P Y computed densely; sigma = squared singular values.

    Both the dense X (n x d) and the dense P Y (n x c) are materialized, so the
    size guard applies to the larger of n*d and n*c.
    """
    cells = max(data.n * data.d, data.n * data.c)
    if cells > ORACLE_MAX_CELLS:
        raise OracleRefusedError(f"dense oracle refused: {cells} cells exceeds {ORACLE_MAX_CELLS}")
    if k < 1 or k > min(data.n, data.c):
        raise DimensionError(f"k = {k} outside [1, min(n, c) = {min(data.n, data.c)}]")

    U, s, _ = np.linalg.svd(data.X.to_dense(), full_matrices=False)
    keep = s > 1e-10 * s[0] if s.size and s[0] > 0 else np.zeros(s.shape, dtype=bool)
    Ux = U[:, keep]
    # P^2 - P = Ux (Ux^T Ux - I) Ux^T, so this bounds the idempotence defect
    defect = float(np.linalg.norm(Ux.T @ Ux - np.eye(Ux.shape[1])))
    if defect > IDEMPOTENCE_TOL:
        logger.warning(f"oracle projector idempotence defect {defect:.3e}")

    A = Ux @ (Ux.T @ data.Y.to_dense())
    _, sa, Vt = np.linalg.svd(A, full_matrices=False)
    return Embedding(V=DenseMatrix(Vt[:k].T), sigma=sa[:k] ** 2)


def cs_embed(c: int, k: int, seed: int) -> Embedding:
    """Random orthonormal label embedding; sigma carries no information"""
    if k < 1 or k > c:
        raise DimensionError(f"cs_embed needs 1 <= k <= c, got k = {k}, c = {c}")
    V = orthogonalize(randn(c, k, SeededRng(seed)))
    if V.cols < k:
        raise RankError(f"random embedding lost rank ({V.cols} < {k})", achievable_k=V.cols)
    return Embedding(V=V, sigma=np.ones(k))


def pca_feature_embed(data: Dataset, k: int, cfg: EmbedConfig) -> DenseMatrix:
    """
    Top-k right singular subspace W (d x k) of the column-centered X.

    The centered matrix is never formed: Xc W = X W - 1 (mu^T W) and
    Xc^T U = X^T U - mu (1^T U). Same range finder as the label embedding,
    with q power iterations on Xc^T Xc.
    """
    if k < 1 or k > data.d:
        raise DimensionError(f"pca_feature_embed needs 1 <= k <= d = {data.d}, got {k}")
    X = data.X
    mu = X.column_means()

    def centered(W: DenseMatrix) -> DenseMatrix:
        return DenseMatrix(spmm(X, W).array - np.outer(np.ones(X.rows), mu @ W.array))

    def centered_t(U: DenseMatrix) -> DenseMatrix:
        return DenseMatrix(spmm_t(X, U).array - np.outer(mu, U.array.sum(axis=0)))

    width = min(k + cfg.p, data.d)
    Q = orthogonalize(randn(data.d, width, SeededRng(cfg.seed)))
    for _ in range(cfg.q):
        Q = orthogonalize(centered_t(centered(Q)))
        if Q.cols < k:
            raise RankError(f"centered features have rank {Q.cols} < k = {k}", achievable_k=Q.cols)

    _, s, Vt = np.linalg.svd(centered(Q).array, full_matrices=False)
    if np.count_nonzero(s > 1e-12 * max(s[0], 1e-300)) < k:
        logger.warning(f"centered features carry fewer than {k} nonzero directions")
    return gemm(Q, DenseMatrix(Vt[:k].T))


def embedding_regressor(data: Dataset, emb: Embedding, solver: SolverConfig) -> DenseMatrix:
    """Z (d x k) regressing the embedded labels Y V on X"""
    if emb.V.rows != data.c:
        raise DimensionError(f"embedding has {emb.V.rows} rows but the dataset has c = {data.c}")
    return ridge_lstsq(data.X, spmm(data.Y, emb.V), solver)


def make_gapped_instance(
    seed: int, n: int, d: int, c: int, k: int, min_gap: float = 0.1, density: float = 0.5, max_attempts: int = 200
) -> Tuple[Dataset, float]:
    """
    Small random problem whose eigenvalues k and k+1 of Y^T P Y have relative
    gap at least min_gap. Labels threshold a planted rank-k score matrix;
    draws are rejected until the gap holds.
    """
    if k + 1 > min(n, c):
        raise DimensionError(f"need k + 1 <= min(n, c), got k = {k}")
    rng = SeededRng(seed)
    for attempt in range(max_attempts):
        mask = rng.uniform((n, d)) < density
        mask[np.arange(n), rng.integers(d, n)] = True
        X = np.where(mask, rng.standard_normal(n * d).reshape(n, d), 0.0)
        weights = rng.standard_normal(d * k).reshape(d, k) @ rng.standard_normal(k * c).reshape(k, c)
        scores = X @ weights + 0.1 * rng.standard_normal(n * c).reshape(n, c)
        Y = (scores > np.quantile(scores, 0.7)).astype(np.float64)
        Y[np.arange(n), np.argmax(scores, axis=1)] = 1.0
        data = Dataset(SparseMatrix.from_dense(X), SparseMatrix.from_dense(Y))
        spectrum = exact_oracle(data, min(n, c)).sigma
        gap = (spectrum[k - 1] - spectrum[k]) / spectrum[k - 1]
        if gap >= min_gap:
            logger.debug(f"gapped instance found after {attempt + 1} draw(s), gap {gap:.3f}")
            return data, float(gap)
    raise RankError(f"no instance with relative gap >= {min_gap} in {max_attempts} draws", achievable_k=0)
