"""
On-disk artifacts: embedding files (REMBED v1 text), trained models (.npz),
prediction lists (text) and JSON run reports.
"""
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Union

import numpy as np

from ..config import EMBEDDING_MAGIC, EMBEDDING_VERSION, ORTHONORMAL_WARN_TOL
from ..errors import FormatError
from .downstream import ModelKind, TrainedModel
from .matcore import DenseMatrix
from .rembrandt import Embedding

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def _fmt(value: float) -> str:
    # 17 significant digits round-trip any binary64 exactly
    return format(float(value), ".17g")


def save_embedding(emb: Embedding, path: PathLike) -> None:
    """
    Line 1: REMBED v1 c k
    Line 2: k sigma values
    Then c lines of k values (rows of V)
    """
    lines = [f"{EMBEDDING_MAGIC} {EMBEDDING_VERSION} {emb.c} {emb.k}", " ".join(_fmt(s) for s in emb.sigma)]
    lines.extend(" ".join(_fmt(v) for v in row) for row in emb.V.array)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(lines) + "\n")


def _parse_row(line: str, expected: int, what: str) -> List[float]:
    tokens = line.split()
    if len(tokens) != expected:
        raise FormatError(f"{what}: expected {expected} values, found {len(tokens)}")
    try:
        return [float(t) for t in tokens]
    except ValueError as e:
        raise FormatError(f"{what}: {e}") from None


def load_embedding(path: PathLike) -> Embedding:
    with open(path, "r", encoding="utf-8") as f:
        lines = [line for line in f.read().splitlines() if line.strip()]
    if not lines:
        raise FormatError(f"{path}: empty embedding file")

    header = lines[0].split()
    if len(header) != 4 or header[0] != EMBEDDING_MAGIC or header[1] != EMBEDDING_VERSION:
        raise FormatError(f"{path}: bad header {lines[0]!r}, expected '{EMBEDDING_MAGIC} {EMBEDDING_VERSION} c k'")
    try:
        c, k = int(header[2]), int(header[3])
    except ValueError:
        raise FormatError(f"{path}: non-integer dimensions in header {lines[0]!r}") from None
    if c < 1 or k < 1:
        raise FormatError(f"{path}: dimensions must be positive, got c={c}, k={k}")
    if len(lines) != c + 2:
        raise FormatError(f"{path}: header declares {c} rows but file has {len(lines) - 2}")

    sigma = _parse_row(lines[1], k, "sigma line")
    V = [_parse_row(line, k, f"row {i}") for i, line in enumerate(lines[2:])]
    try:
        emb = Embedding(V=DenseMatrix(np.array(V).reshape(c, k)), sigma=np.array(sigma))
    except ValueError as e:
        raise FormatError(f"{path}: {e}") from None

    error = emb.orthonormality_error()
    if error > ORTHONORMAL_WARN_TOL:
        logger.warning(f"{path}: embedding columns deviate from orthonormal by {error:.3e}")
    return emb


def save_model(model: TrainedModel, path: PathLike) -> None:
    arrays = {"kind": np.array(model.kind.value), "Z": model.Z.array, "V": model.V.array}
    if model.heads is not None:
        arrays["heads"] = model.heads
        arrays["history"] = np.array(model.history)
    with open(path, "wb") as f:
        np.savez(f, **arrays)


def load_model(path: PathLike) -> TrainedModel:
    try:
        with np.load(path, allow_pickle=False) as npz:
            stored = {name: npz[name] for name in npz.files}
    except (OSError, ValueError) as e:
        raise FormatError(f"{path}: not a model file ({e})") from None
    missing = {"kind", "Z", "V"} - stored.keys()
    if missing:
        raise FormatError(f"{path}: model file lacks {sorted(missing)}")
    try:
        return TrainedModel(
            kind=ModelKind(str(stored["kind"])),
            Z=DenseMatrix(stored["Z"]),
            V=DenseMatrix(stored["V"]),
            heads=stored.get("heads"),
            history=tuple(float(h) for h in stored.get("history", ())),
        )
    except ValueError as e:
        raise FormatError(f"{path}: {e}") from None


def save_predictions(predictions, path: PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for row in predictions:
            f.write(" ".join(str(int(label)) for label in row) + "\n")


def load_predictions(path: PathLike) -> List[List[int]]:
    rows = []
    with open(path, "r", encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            try:
                rows.append([int(token) for token in line.split()])
            except ValueError:
                raise FormatError(f"{path}: line {line_number}: non-integer label") from None
    return rows


def write_report(report: Dict[str, Any], path: PathLike) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(report, f, indent=2, sort_keys=True)
        f.write("\n")
