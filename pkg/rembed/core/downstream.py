"""
Classifiers on top of embeddings, top-k decoding, evaluation metrics and the
planted low-rank problem generator used for desk-scale comparisons.
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.special import expit, log_expit
from tqdm import tqdm

from ..config import (
    DEFAULT_EPOCHS,
    DEFAULT_LEARNING_RATE,
    EmbedConfig,
    PRECISION_CUTOFFS,
    PREDICT_CHUNK_ROWS,
    SolverConfig,
    SynthSpec,
)
from ..errors import DimensionError, InvalidInputError
from .linsolve import resolve_ridge, ridge_lstsq
from .matcore import DenseMatrix, SeededRng, SparseMatrix, spmm
from .rembrandt import Dataset, Embedding, cs_embed, embedding_regressor, pca_feature_embed, rembrandt_embed

logger = logging.getLogger(__name__)

BASE_RATE_FLOOR = 1e-6


class ModelKind(str, Enum):
    INNER_PRODUCT = "inner-product-decoder"
    INDEPENDENT_LOGISTIC = "independent-logistic"


@dataclass(frozen=True)
class TrainedModel:
    """
    Z (d x k) maps features to the k-dim representation. Inner-product models
    score labels as (x^T Z) V^T; logistic models apply per-label heads
    (c x (k+1), bias last) to x^T Z.
    """

    kind: ModelKind
    Z: DenseMatrix
    V: DenseMatrix
    heads: Optional[np.ndarray] = None
    history: Tuple[float, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "kind", ModelKind(self.kind))
        if self.Z.cols != self.V.cols:
            raise DimensionError(f"Z has {self.Z.cols} columns but V has {self.V.cols}")
        if (self.heads is not None) != (self.kind is ModelKind.INDEPENDENT_LOGISTIC):
            raise InvalidInputError("heads must be present exactly for independent-logistic models")
        if self.heads is not None and self.heads.shape != (self.V.rows, self.Z.cols + 1):
            raise DimensionError(f"heads shape {self.heads.shape}, expected {(self.V.rows, self.Z.cols + 1)}")

    @property
    def d(self) -> int:
        return self.Z.rows

    @property
    def c(self) -> int:
        return self.V.rows


class EvalReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    test_error: float = Field(ge=0.0, le=1.0)
    precision_at_1: float = Field(ge=0.0, le=1.0)
    n_eval: int = Field(ge=1)
    precision_at_k: Dict[int, float] = Field(default_factory=dict)


def train_inner_product(data: Dataset, emb: Embedding, solver: SolverConfig) -> TrainedModel:
    if emb.k < 1:
        raise InvalidInputError("embedding dimension k must be at least 1")
    Z = embedding_regressor(data, emb, solver)
    return TrainedModel(kind=ModelKind.INNER_PRODUCT, Z=Z, V=emb.V)


def train_feature_decoder(data: Dataset, W: DenseMatrix, solver: SolverConfig) -> TrainedModel:
    """Unsupervised representation X W followed by a least-squares map to the labels"""
    if W.rows != data.d:
        raise DimensionError(f"feature embedding has {W.rows} rows but d = {data.d}")
    rep = spmm(data.X, W)
    R = rep.array
    lam = resolve_ridge(rep, solver)
    gram = R.T @ R + lam * np.eye(W.cols)
    G = np.linalg.lstsq(gram, (data.Y.csr.T @ R).T, rcond=None)[0]
    return TrainedModel(kind=ModelKind.INNER_PRODUCT, Z=W, V=DenseMatrix(G.T))


def _log_loss(R: np.ndarray, targets: np.ndarray, heads: np.ndarray) -> float:
    logits = R @ heads[:, :-1].T + heads[:, -1]
    loss = -(targets * log_expit(logits) + (1.0 - targets) * log_expit(-logits))
    return float(loss.mean())


def train_independent_logistic(
    data: Dataset,
    emb_repr: DenseMatrix,
    labels: SparseMatrix,
    epochs: int = DEFAULT_EPOCHS,
    lr: float = DEFAULT_LEARNING_RATE,
    seed: int = 0,
    *,
    Z: Optional[DenseMatrix] = None,
    V: Optional[DenseMatrix] = None,
    solver: Optional[SolverConfig] = None,
    progress: bool = False,
) -> TrainedModel:
    """
    One binary logistic regression per label column on the k-dim representation,
    fitted by plain SGD with a fixed step. All heads see the same per-epoch
    shuffle, so each head's trajectory is independent of the others.
    Labels without positives get a frozen bias-only head at the (floored) base rate.

    Z is the d x k map that turns test features into the representation. When
    it is omitted it is fitted by ridge least squares of emb_repr on data.X,
    which recovers W exactly when emb_repr = X W with X of full column rank
    and lambda = 0. V defaults to the head weights.
    """
    if emb_repr.rows != labels.rows:
        raise DimensionError(f"representation has {emb_repr.rows} rows but labels have {labels.rows}")
    if emb_repr.cols < 1:
        raise InvalidInputError("representation dimension k must be at least 1")
    if epochs < 1 or lr <= 0:
        raise InvalidInputError(f"need epochs >= 1 and lr > 0, got {epochs}, {lr}")
    if labels.cols != data.c:
        raise DimensionError(f"labels have {labels.cols} columns but c = {data.c}")
    if Z is not None and Z.rows != data.d:
        raise DimensionError(f"Z has {Z.rows} rows but d = {data.d}")

    n, k = emb_repr.shape
    c = labels.cols
    targets = (labels.to_dense() > 0).astype(np.float64)
    positives = targets.sum(axis=0)
    if not np.any(positives):
        raise InvalidInputError("no label has a positive example")

    heads = np.zeros((c, k + 1))
    trainable = positives > 0
    if not np.all(trainable):
        base = np.clip(positives / n, BASE_RATE_FLOOR, 1.0 - BASE_RATE_FLOOR)
        heads[~trainable, -1] = np.log(base[~trainable] / (1.0 - base[~trainable]))
        logger.warning(f"{int((~trainable).sum())} label(s) have no positives; using bias-only heads")

    R = emb_repr.array
    W, b = heads[:, :-1], heads[:, -1]
    mask = trainable.astype(np.float64)
    rng = SeededRng(seed)
    history: List[float] = []
    for _ in tqdm(range(epochs), desc="logistic heads", disable=not progress):
        for i in rng.permutation(n):
            x = R[i]
            step = lr * mask * (expit(W @ x + b) - targets[i])
            W -= np.outer(step, x)
            b -= step
        history.append(_log_loss(R, targets, heads))
    logger.info(f"trained {c} logistic heads for {epochs} epochs, final loss {history[-1]:.4f}")
    if Z is None:
        Z = ridge_lstsq(data.X, emb_repr, solver or SolverConfig())
    if V is None:
        V = DenseMatrix(heads[:, :-1])
    return TrainedModel(kind=ModelKind.INDEPENDENT_LOGISTIC, Z=Z, V=V, heads=heads, history=tuple(history))


def train_logistic_on_embedding(
    data: Dataset,
    emb: Embedding,
    solver: SolverConfig,
    epochs: int = DEFAULT_EPOCHS,
    lr: float = DEFAULT_LEARNING_RATE,
    seed: int = 0,
    progress: bool = False,
) -> TrainedModel:
    """Regress into the label embedding, then fit logistic heads on X Z"""
    Z = embedding_regressor(data, emb, solver)
    return train_independent_logistic(
        data, spmm(data.X, Z), data.Y, epochs, lr, seed, Z=Z, V=emb.V, progress=progress
    )


def rank_labels(scores: np.ndarray, topk: int) -> np.ndarray:
    """Indices of the topk highest scores per row; ties go to the smaller label index"""
    order = np.argsort(-scores, axis=1, kind="stable")
    return order[:, :topk]


def _scores(model: TrainedModel, R: np.ndarray) -> np.ndarray:
    if model.kind is ModelKind.INNER_PRODUCT:
        return R @ model.V.array.T
    return expit(R @ model.heads[:, :-1].T + model.heads[:, -1])


def predict_topk(model: TrainedModel, X_test: SparseMatrix, topk: int) -> np.ndarray:
    """(n x min(topk, c)) label indices, best first"""
    if X_test.cols != model.d:
        raise DimensionError(f"test features have {X_test.cols} columns, model expects d = {model.d}")
    if topk < 1:
        raise InvalidInputError(f"topk must be at least 1, got {topk}")
    width = min(topk, model.c)
    out = np.empty((X_test.rows, width), dtype=np.int64)
    for start in range(0, X_test.rows, PREDICT_CHUNK_ROWS):
        stop = min(start + PREDICT_CHUNK_ROWS, X_test.rows)
        R = X_test.csr[start:stop] @ model.Z.array
        out[start:stop] = rank_labels(_scores(model, R), width)
    return out


def random_predictions(n: int, c: int, topk: int, seed: int) -> np.ndarray:
    """Uniform-random label rankings"""
    rng = SeededRng(seed)
    width = min(topk, c)
    return np.stack([rng.permutation(c)[:width] for _ in range(n)]) if n else np.empty((0, width), dtype=np.int64)


def evaluate(predictions, truth: SparseMatrix, cutoffs: Iterable[int] = PRECISION_CUTOFFS) -> EvalReport:
    """
    test_error: share of examples whose top-1 label is not a true label.
    precision@k: mean share of the top k predictions that are true labels.
    Examples with no true labels are skipped.
    """
    preds = [list(row) for row in predictions]
    if len(preds) != truth.rows:
        raise DimensionError(f"{len(preds)} prediction rows for {truth.rows} truth rows")
    width = min((len(row) for row in preds), default=0)
    cutoffs = sorted(k for k in set(cutoffs) | {1} if 1 <= k <= width)

    hits = {k: 0.0 for k in cutoffs}
    n_eval = 0
    skipped = 0
    for i, row in enumerate(preds):
        true_labels, _ = truth.row(i)
        if true_labels.size == 0:
            skipped += 1
            continue
        if not row:
            raise InvalidInputError(f"example {i} has no predictions")
        n_eval += 1
        relevant = set(true_labels.tolist())
        for k in cutoffs:
            hits[k] += sum(1 for label in row[:k] if label in relevant) / k
    if skipped:
        logger.warning(f"excluded {skipped} example(s) with no true labels from evaluation")
    if n_eval == 0:
        raise InvalidInputError("no example with true labels to evaluate")

    precision = {k: hits[k] / n_eval for k in cutoffs}
    return EvalReport(
        test_error=1.0 - precision[1],
        precision_at_1=precision[1],
        n_eval=n_eval,
        precision_at_k=precision,
    )


def make_synthetic(spec: SynthSpec) -> Tuple[Dataset, Dataset]:
    """
    Planted problem: sparse Gaussian X, weights W0 = A B^T of rank true_rank,
    label scores X W0. One label per example takes the argmax; more take the
    top scores. Each label is replaced by a uniformly drawn other label with
    probability label_noise. Rows are shuffled and split train/test.
    """
    rng = SeededRng(spec.seed)
    n, d, c, r = spec.n, spec.d, spec.c, spec.true_rank

    mask = rng.uniform((n, d)) < spec.density
    mask[np.arange(n), rng.integers(d, n)] = True
    X = np.where(mask, rng.standard_normal(n * d).reshape(n, d), 0.0)
    A = rng.standard_normal(d * r).reshape(d, r)
    B = rng.standard_normal(c * r).reshape(c, r)
    scores = X @ A @ B.T

    L = spec.labels_per_example
    chosen = rank_labels(scores, L)
    flips = rng.bernoulli(spec.label_noise, (n, L))
    rows, cols = [], []
    for i in range(n):
        current = chosen[i].tolist()
        for j in range(L):
            if flips[i, j]:
                others = [label for label in range(c) if label not in current]
                current[j] = others[int(rng.integers(len(others), 1)[0])]
        rows.extend([i] * L)
        cols.extend(current)
    Y = SparseMatrix.from_triplets(n, c, rows, cols, np.ones(len(rows)))

    data = Dataset(SparseMatrix.from_dense(X), Y)
    order = rng.permutation(n)
    n_test = max(1, int(round(spec.test_fraction * n)))
    train, test = data.take_rows(order[n_test:]), data.take_rows(order[:n_test])
    logger.info(f"synthetic data: {train.n} train / {test.n} test, d={d}, c={c}, rank={r}")
    return train, test


def accuracy(predictions: np.ndarray, truth: SparseMatrix) -> float:
    return 1.0 - evaluate(predictions, truth, cutoffs=(1,)).test_error


def compare_methods(
    spec: SynthSpec,
    k: int,
    solver: SolverConfig,
    seeds: Sequence[int],
    p: int = 20,
    q: int = 1,
    decoder: str = "inner-product",
    epochs: int = DEFAULT_EPOCHS,
    lr: float = DEFAULT_LEARNING_RATE,
    progress: bool = False,
) -> Dict[str, List[float]]:
    """
    Top-1 test precision per seed (the multiclass accuracy when every example
    has one label).

    decoder="inner-product": randomized label embedding + decoder ("re"),
    random Gaussian label embedding + decoder ("cs"), unsupervised feature
    PCA + least-squares decoder ("pca") and uniform guessing ("random").

    decoder="logistic": independent logistic heads on the regressed
    representation for both label embeddings ("re", "cs"), against uniform
    guessing. This is the multilabel composition, usually run with
    spec.labels_per_example > 1.
    """
    if decoder not in ("inner-product", "logistic"):
        raise InvalidInputError(f"unknown decoder {decoder!r}")
    names = ["re", "cs", "pca", "random"] if decoder == "inner-product" else ["re", "cs", "random"]
    results: Dict[str, List[float]] = {name: [] for name in names}
    for seed in tqdm(seeds, desc="seeds", disable=not progress):
        train, test = make_synthetic(spec.model_copy(update={"seed": seed}))
        cfg = EmbedConfig(k=k, p=p, q=q, seed=seed, solver=solver)
        embeddings = {"re": rembrandt_embed(train, cfg), "cs": cs_embed(train.c, k, seed)}
        if decoder == "inner-product":
            models = {name: train_inner_product(train, emb, solver) for name, emb in embeddings.items()}
            models["pca"] = train_feature_decoder(train, pca_feature_embed(train, k, cfg), solver)
        else:
            models = {
                name: train_logistic_on_embedding(train, emb, solver, epochs, lr, seed)
                for name, emb in embeddings.items()
            }
        for name, model in models.items():
            results[name].append(accuracy(predict_topk(model, test.X, 1), test.Y))
        results["random"].append(accuracy(random_predictions(test.n, test.c, 1, seed), test.Y))
    return results
