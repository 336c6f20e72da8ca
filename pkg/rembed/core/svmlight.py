"""
Multilabel svmlight text format:

    label[,label...] idx:val [idx:val ...]   # optional comment

Blank lines and comment-only lines are skipped. Duplicate feature indices on a
line are summed; duplicate labels count once. Written files are canonical:
sorted indices, shortest round-trip float repr.
"""
import logging
from pathlib import Path
from typing import List, Optional, Union

import numpy as np

from ..config import DEFAULT_FEATURES_BASE, DEFAULT_LABELS_BASE
from ..errors import IndexOutOfRangeError, InvalidInputError, ParseError
from .matcore import SparseMatrix
from .rembrandt import Dataset

logger = logging.getLogger(__name__)


def _parse_int(token: str, what: str, line_number: int) -> int:
    try:
        return int(token)
    except ValueError:
        raise ParseError(f"non-integer {what} {token!r}", line_number) from None


def _parse_float(token: str, line_number: int) -> float:
    try:
        value = float(token)
    except ValueError:
        raise ParseError(f"non-numeric value {token!r}", line_number) from None
    if not np.isfinite(value):
        raise ParseError(f"non-finite value {token!r}", line_number)
    return value


def load_svmlight(
    path: Union[str, Path],
    labels_base: int = DEFAULT_LABELS_BASE,
    features_base: int = DEFAULT_FEATURES_BASE,
    n_features: Optional[int] = None,
    n_classes: Optional[int] = None,
    allow_unlabeled: bool = False,
) -> Dataset:
    """Parse a multilabel svmlight file; d and c default to the largest nonzero index + 1"""
    x_rows: List[int] = []
    x_cols: List[int] = []
    x_vals: List[float] = []
    y_rows: List[int] = []
    y_cols: List[int] = []
    line_numbers: List[int] = []

    with open(path, "r", encoding="utf-8") as f:
        for line_number, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            row = len(line_numbers)
            line_numbers.append(line_number)
            tokens = line.split()
            labeled = ":" not in tokens[0]
            if labeled:
                labels = set()
                for token in tokens[0].split(","):
                    label = _parse_int(token, "label", line_number) - labels_base
                    if label < 0:
                        raise ParseError(f"label {token} below base {labels_base}", line_number)
                    labels.add(label)
                y_rows.extend([row] * len(labels))
                y_cols.extend(sorted(labels))
                tokens = tokens[1:]
            for token in tokens:
                idx, sep, value = token.partition(":")
                if not sep or not idx or not value:
                    raise ParseError(f"malformed feature {token!r}", line_number)
                feature = _parse_int(idx, "feature index", line_number) - features_base
                if feature < 0:
                    raise ParseError(f"feature index {idx} below base {features_base}", line_number)
                x_rows.append(row)
                x_cols.append(feature)
                x_vals.append(_parse_float(value, line_number))
            if not labeled and not allow_unlabeled:
                raise InvalidInputError(f"line {line_number}: example has no labels")

    n = len(line_numbers)
    if n == 0:
        raise ParseError(f"{path}: no examples")

    data = Dataset(
        X=_assemble(n, x_rows, x_cols, x_vals, n_features, "feature", line_numbers),
        Y=_assemble(n, y_rows, y_cols, np.ones(len(y_cols)), n_classes, "label", line_numbers),
    )
    logger.info(f"Loaded {path}: n={data.n}, d={data.d}, c={data.c}, avg labels/example={data.avg_label_sparsity:.2f}")
    return data


def _assemble(
    n: int, rows: List[int], cols: List[int], values, declared: Optional[int], what: str, line_numbers: List[int]
) -> SparseMatrix:
    """
    Canonical matrix for one side of the file. Without a declared width the
    width is the largest index that survives duplicate summing and zero
    dropping, so explicit zeros never widen the matrix.
    """
    if declared is not None and cols:
        top = int(np.argmax(cols))
        if cols[top] >= declared:
            raise IndexOutOfRangeError(
                f"line {line_numbers[rows[top]]}: {what} index {cols[top]} >= declared {what} count {declared}"
            )
    width = declared if declared is not None else (max(cols) + 1 if cols else 1)
    M = SparseMatrix.from_triplets(n, width, rows, cols, values)
    if declared is None:
        used = int(M.col_indices.max()) + 1 if M.nnz else 1
        if used < width:
            M = SparseMatrix.from_csr_arrays(n, used, M.row_offsets, M.col_indices, M.values)
    return M


def save_svmlight(
    data: Dataset,
    path: Union[str, Path],
    labels_base: int = DEFAULT_LABELS_BASE,
    features_base: int = DEFAULT_FEATURES_BASE,
) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for i in range(data.n):
            labels, _ = data.Y.row(i)
            features, values = data.X.row(i)
            parts = []
            if labels.size:
                parts.append(",".join(str(int(label) + labels_base) for label in labels))
            parts.extend(f"{int(j) + features_base}:{float(v)!r}" for j, v in zip(features, values))
            f.write(" ".join(parts) + "\n")
