"""
Sparse (CSR) and dense (column-major) matrices, the seeded normal generator,
and the three products everything else is built from.

Both matrix types are immutable: constructors copy their input, dense buffers
are marked read-only and neither class exposes a mutating method.
"""
import logging
import math
from typing import Tuple

import numpy as np
import scipy.sparse as sp

from ..config import RNG_ALGORITHM
from ..errors import DimensionError, InvalidInputError

logger = logging.getLogger(__name__)


def _freeze(array: np.ndarray) -> np.ndarray:
    array.flags.writeable = False
    return array


class SparseMatrix:
    """Row-compressed sparse matrix in canonical form (sorted, no duplicates, no explicit zeros)"""

    __slots__ = ("_csr",)

    def __init__(self, matrix):
        csr = sp.csr_matrix(matrix, dtype=np.float64, copy=True)
        csr.sum_duplicates()
        csr.eliminate_zeros()
        csr.sort_indices()
        if not np.all(np.isfinite(csr.data)):
            raise InvalidInputError("sparse matrix contains NaN or Inf values")
        self._csr = csr

    @classmethod
    def from_csr_arrays(cls, rows: int, cols: int, row_offsets, col_indices, values) -> "SparseMatrix":
        """Build from raw CSR arrays, checking every storage invariant"""
        offsets = np.asarray(row_offsets, dtype=np.int64)
        indices = np.asarray(col_indices, dtype=np.int64)
        data = np.asarray(values, dtype=np.float64)
        if rows < 0 or cols < 0:
            raise DimensionError(f"negative shape ({rows}, {cols})")
        if offsets.shape != (rows + 1,):
            raise DimensionError(f"row_offsets has length {offsets.size}, expected {rows + 1}")
        if offsets[0] != 0 or offsets[-1] != indices.size or indices.size != data.size:
            raise DimensionError("row_offsets must start at 0 and end at nnz")
        if np.any(np.diff(offsets) < 0):
            raise InvalidInputError("row_offsets must be nondecreasing")
        if indices.size and (indices.min() < 0 or indices.max() >= cols):
            raise DimensionError(f"column index out of range for {cols} columns")
        for i in range(rows):
            row = indices[offsets[i]:offsets[i + 1]]
            if row.size > 1 and np.any(np.diff(row) <= 0):
                raise InvalidInputError(f"column indices of row {i} are not strictly increasing")
        if np.any(data == 0.0):
            raise InvalidInputError("explicit zeros are not allowed in stored values")
        return cls(sp.csr_matrix((data, indices, offsets), shape=(rows, cols)))

    @classmethod
    def from_triplets(cls, rows: int, cols: int, row_idx, col_idx, values) -> "SparseMatrix":
        """Build from coordinate triplets; duplicate coordinates are summed"""
        row_idx = np.asarray(row_idx, dtype=np.int64)
        col_idx = np.asarray(col_idx, dtype=np.int64)
        if row_idx.size and (row_idx.max() >= rows or col_idx.max() >= cols or min(row_idx.min(), col_idx.min()) < 0):
            raise DimensionError(f"triplet index outside shape ({rows}, {cols})")
        coo = sp.coo_matrix((np.asarray(values, dtype=np.float64), (row_idx, col_idx)), shape=(rows, cols))
        return cls(coo.tocsr())

    @classmethod
    def from_dense(cls, array) -> "SparseMatrix":
        return cls(sp.csr_matrix(np.atleast_2d(np.asarray(array, dtype=np.float64))))

    @classmethod
    def identity(cls, n: int, scale: float = 1.0) -> "SparseMatrix":
        return cls(sp.identity(n, dtype=np.float64, format="csr") * scale)

    @property
    def csr(self) -> sp.csr_matrix:
        return self._csr

    @property
    def rows(self) -> int:
        return self._csr.shape[0]

    @property
    def cols(self) -> int:
        return self._csr.shape[1]

    @property
    def shape(self) -> Tuple[int, int]:
        return self._csr.shape

    @property
    def nnz(self) -> int:
        return int(self._csr.nnz)

    @property
    def row_offsets(self) -> np.ndarray:
        return self._csr.indptr

    @property
    def col_indices(self) -> np.ndarray:
        return self._csr.indices

    @property
    def values(self) -> np.ndarray:
        return self._csr.data

    def row(self, i: int) -> Tuple[np.ndarray, np.ndarray]:
        start, end = self._csr.indptr[i], self._csr.indptr[i + 1]
        return self._csr.indices[start:end], self._csr.data[start:end]

    def row_nnz(self) -> np.ndarray:
        return np.diff(self._csr.indptr)

    def column_means(self) -> np.ndarray:
        return np.asarray(self._csr.mean(axis=0)).ravel()

    def take_rows(self, indices) -> "SparseMatrix":
        return SparseMatrix(self._csr[np.asarray(indices, dtype=np.int64)])

    def scale_rows(self, factors) -> "SparseMatrix":
        return SparseMatrix(sp.diags(np.asarray(factors, dtype=np.float64)) @ self._csr)

    def to_dense(self) -> np.ndarray:
        return self._csr.toarray()

    def equals(self, other: "SparseMatrix") -> bool:
        return (
            self.shape == other.shape
            and np.array_equal(self.row_offsets, other.row_offsets)
            and np.array_equal(self.col_indices, other.col_indices)
            and np.array_equal(self.values, other.values)
        )

    def __repr__(self) -> str:
        return f"SparseMatrix(rows={self.rows}, cols={self.cols}, nnz={self.nnz})"


class DenseMatrix:
    """Column-major dense matrix with all entries finite"""

    __slots__ = ("_array",)

    def __init__(self, values):
        array = np.array(values, dtype=np.float64, order="F", copy=True, ndmin=2)
        if array.ndim != 2:
            raise DimensionError(f"dense matrix must be 2-D, got {array.ndim}-D")
        if not np.all(np.isfinite(array)):
            raise InvalidInputError("dense matrix contains NaN or Inf values")
        self._array = _freeze(array)

    @classmethod
    def from_column_major(cls, rows: int, cols: int, values) -> "DenseMatrix":
        flat = np.asarray(values, dtype=np.float64)
        if flat.size != rows * cols:
            raise DimensionError(f"{flat.size} values cannot fill a {rows}x{cols} matrix")
        return cls(flat.reshape((rows, cols), order="F"))

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "DenseMatrix":
        return cls(np.zeros((rows, cols)))

    @property
    def array(self) -> np.ndarray:
        return self._array

    @property
    def rows(self) -> int:
        return self._array.shape[0]

    @property
    def cols(self) -> int:
        return self._array.shape[1]

    @property
    def shape(self) -> Tuple[int, int]:
        return self._array.shape

    @property
    def values(self) -> np.ndarray:
        """Entries in column-major order"""
        return self._array.ravel(order="F")

    def __repr__(self) -> str:
        return f"DenseMatrix(rows={self.rows}, cols={self.cols})"


class SeededRng:
    """
    Reproducible random stream.

    Uniform doubles come from PCG64 (53 high bits of each 64-bit output).
    Normal variates use Box-Muller on consecutive uniform pairs (u1, u2):
        r = sqrt(-2 ln(1 - u1)), z0 = r cos(2 pi u2), z1 = r sin(2 pi u2)
    emitted in the order z0, z1 of pair 0, then pair 1, and so on.
    Every other draw (permutations, integers, coin flips) is derived from the
    same uniform stream, so one seed pins the whole stream.
    """

    algorithm = RNG_ALGORITHM

    def __init__(self, seed: int):
        if seed < 0:
            raise InvalidInputError(f"seed must be nonnegative, got {seed}")
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def uniform(self, size) -> np.ndarray:
        """Uniform doubles on [0, 1)"""
        return self._gen.random(size)

    def standard_normal(self, size: int) -> np.ndarray:
        pairs = (size + 1) // 2
        u = self._gen.random(2 * pairs)
        radius = np.sqrt(-2.0 * np.log1p(-u[0::2]))
        theta = 2.0 * math.pi * u[1::2]
        out = np.empty(2 * pairs)
        out[0::2] = radius * np.cos(theta)
        out[1::2] = radius * np.sin(theta)
        return out[:size]

    def permutation(self, n: int) -> np.ndarray:
        return np.argsort(self._gen.random(n), kind="stable")

    def integers(self, high: int, size) -> np.ndarray:
        """Uniform integers on [0, high)"""
        draws = np.floor(self._gen.random(size) * high).astype(np.int64)
        return np.minimum(draws, high - 1)

    def bernoulli(self, prob: float, size) -> np.ndarray:
        return self._gen.random(size) < prob

    def __repr__(self) -> str:
        return f"SeededRng(seed={self.seed}, algorithm={self.algorithm!r})"


def randn(rows: int, cols: int, rng: SeededRng) -> DenseMatrix:
    """i.i.d. standard normal matrix, filled column by column"""
    if rows < 1 or cols < 1:
        raise DimensionError(f"randn needs positive dimensions, got ({rows}, {cols})")
    return DenseMatrix.from_column_major(rows, cols, rng.standard_normal(rows * cols))


def spmm(A: SparseMatrix, B: DenseMatrix) -> DenseMatrix:
    """A @ B"""
    if A.cols != B.rows:
        raise DimensionError(f"spmm: A is {A.rows}x{A.cols} but B has {B.rows} rows")
    return DenseMatrix(A.csr @ B.array)


def spmm_t(A: SparseMatrix, B: DenseMatrix) -> DenseMatrix:
    """A.T @ B, scattering each stored entry of A (the CSC view shares A's buffers)"""
    if A.rows != B.rows:
        raise DimensionError(f"spmm_t: A is {A.rows}x{A.cols} but B has {B.rows} rows")
    return DenseMatrix(A.csr.T @ B.array)


def gemm(A: DenseMatrix, B: DenseMatrix, transpose_a: bool = False) -> DenseMatrix:
    left = A.array.T if transpose_a else A.array
    if left.shape[1] != B.rows:
        raise DimensionError(f"gemm: inner dimensions {left.shape[1]} and {B.rows} differ")
    return DenseMatrix(left @ B.array)
