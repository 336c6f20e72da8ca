"""
Command-line surface: embed, oracle-check, train, predict, evaluate, synth, compare.

Numeric modules are imported lazily inside the command handlers so that --deterministic can
pin the BLAS thread pools before numpy loads.
"""
import argparse
import json
import logging
import os
import sys
import time
from enum import Enum
from pathlib import Path
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .config import (
    DEFAULT_EPOCHS,
    DEFAULT_FEATURES_BASE,
    DEFAULT_LABELS_BASE,
    DEFAULT_LEARNING_RATE,
    DEFAULT_MAX_ITERS,
    DEFAULT_OVERSAMPLING,
    DEFAULT_POWER_ITERS,
    DEFAULT_TOL,
    DEFAULT_TOPK,
    RNG_ALGORITHM,
    EmbedConfig,
    SolverConfig,
    SynthSpec,
)
from .errors import RembedError

logger = logging.getLogger(__name__)

THREAD_ENV_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "VECLIB_MAXIMUM_THREADS")
IO_EXIT_CODE = 10
INTERNAL_EXIT_CODE = 1


class Command(str, Enum):
    EMBED = "embed"
    ORACLE_CHECK = "oracle-check"
    TRAIN = "train"
    PREDICT = "predict"
    EVALUATE = "evaluate"
    SYNTH = "synth"
    COMPARE = "compare"


REQUIRED_PATHS = {
    Command.EMBED: ("input", "output"),
    Command.ORACLE_CHECK: ("input",),
    Command.TRAIN: ("input", "embedding", "output"),
    Command.PREDICT: ("input", "model", "output"),
    Command.EVALUATE: ("input", "predictions"),
    Command.SYNTH: ("output", "test_output"),
    Command.COMPARE: (),
}


class RunConfig(BaseModel):
    """Everything one CLI invocation needs, validated up front"""

    model_config = ConfigDict(frozen=True)

    command: Command
    input: Optional[Path] = None
    output: Optional[Path] = None
    test_output: Optional[Path] = None
    embedding: Optional[Path] = None
    model: Optional[Path] = None
    predictions: Optional[Path] = None
    report: Optional[Path] = None

    # embedding
    method: str = Field(default="rembrandt", pattern="^(rembrandt|cs|oracle)$")
    k: int = Field(default=10, ge=1)
    p: int = Field(default=DEFAULT_OVERSAMPLING, ge=0)
    q: int = Field(default=DEFAULT_POWER_ITERS, ge=0)
    seed: int = Field(default=0, ge=0)
    ridge: Optional[float] = Field(default=None, ge=0.0)
    tol: float = Field(default=DEFAULT_TOL, gt=0.0)
    max_iters: int = Field(default=DEFAULT_MAX_ITERS, ge=1)
    normalize_labels: bool = False

    # data format
    labels_base: int = Field(default=DEFAULT_LABELS_BASE, ge=0)
    features_base: int = Field(default=DEFAULT_FEATURES_BASE, ge=0)
    features: Optional[int] = Field(default=None, ge=1)
    classes: Optional[int] = Field(default=None, ge=1)

    # downstream
    decoder: str = Field(default="inner-product", pattern="^(inner-product|logistic)$")
    topk: int = Field(default=DEFAULT_TOPK, ge=1)
    epochs: int = Field(default=DEFAULT_EPOCHS, ge=1)
    lr: float = Field(default=DEFAULT_LEARNING_RATE, gt=0.0)

    # synthetic data
    n: int = Field(default=2000, ge=2)
    d: int = Field(default=50, ge=1)
    c: int = Field(default=30, ge=2)
    rank: int = Field(default=5, ge=1)
    noise: float = Field(default=0.05, ge=0.0, lt=1.0)
    labels_per_example: int = Field(default=1, ge=1)
    density: float = Field(default=0.2, gt=0.0, le=1.0)
    seeds: int = Field(default=20, ge=1)

    deterministic: bool = True

    @model_validator(mode="after")
    def _check_paths(self):
        missing = [name for name in REQUIRED_PATHS[self.command] if getattr(self, name) is None]
        if missing:
            flags = ", ".join("--" + name.replace("_", "-") for name in missing)
            raise ValueError(f"{self.command.value} requires {flags}")
        return self

    def embed_config(self) -> EmbedConfig:
        return EmbedConfig(k=self.k, p=self.p, q=self.q, seed=self.seed, solver=self.solver_config(),
                           normalize_labels=self.normalize_labels)

    def solver_config(self) -> SolverConfig:
        return SolverConfig(ridge_lambda=self.ridge, tol=self.tol, max_iters=self.max_iters)

    def synth_spec(self) -> SynthSpec:
        return SynthSpec(n=self.n, d=self.d, c=self.c, true_rank=self.rank, label_noise=self.noise,
                         labels_per_example=self.labels_per_example, density=self.density, seed=self.seed)


def _load_dataset(config: RunConfig, allow_unlabeled: bool = False):
    from .core.svmlight import load_svmlight

    return load_svmlight(
        config.input,
        labels_base=config.labels_base,
        features_base=config.features_base,
        n_features=config.features,
        n_classes=config.classes,
        allow_unlabeled=allow_unlabeled,
    )


def _emit(payload: dict) -> None:
    print(json.dumps(payload, sort_keys=True))


def _cmd_embed(config: RunConfig) -> None:
    from .core.artifacts import save_embedding, write_report
    from .core.rembrandt import cs_embed, exact_oracle, rembrandt_embed

    data = _load_dataset(config)
    cfg = config.embed_config()
    start = time.perf_counter()
    if config.method == "rembrandt":
        emb = rembrandt_embed(data, cfg)
    elif config.method == "cs":
        emb = cs_embed(data.c, cfg.k, cfg.seed)
    else:
        emb = exact_oracle(data, cfg.k)
    wall = time.perf_counter() - start
    save_embedding(emb, config.output)

    report = {
        "command": config.command.value,
        "method": config.method,
        "input": str(config.input),
        "output": str(config.output),
        "n": data.n,
        "d": data.d,
        "c": data.c,
        "avg_label_sparsity": data.avg_label_sparsity,
        "config": cfg.model_dump(),
        "rng_algorithm": RNG_ALGORITHM,
        "wall_time_s": wall,
        "sigma": [float(s) for s in emb.sigma],
    }
    report_path = config.report or Path(f"{config.output}.report.json")
    write_report(report, report_path)
    logger.info(f"Embedding ({emb.c}x{emb.k}) written to {config.output} in {wall:.2f}s")


def _cmd_oracle_check(config: RunConfig) -> None:
    import numpy as np

    from .core.rembrandt import exact_oracle, principal_angles, rembrandt_embed

    data = _load_dataset(config)
    cfg = config.embed_config()
    emb = rembrandt_embed(data, cfg)
    oracle = exact_oracle(data, cfg.k)
    angles = principal_angles(emb.V, oracle.V)
    deltas = np.abs(emb.sigma - oracle.sigma) / np.maximum(oracle.sigma, np.finfo(float).tiny)
    _emit({
        "k": cfg.k,
        "p": cfg.p,
        "q": cfg.q,
        "seed": cfg.seed,
        "principal_angles": [float(a) for a in angles],
        "max_principal_angle": float(angles.max()),
        "sigma": [float(s) for s in emb.sigma],
        "sigma_oracle": [float(s) for s in oracle.sigma],
        "sigma_relative_delta": [float(x) for x in deltas],
        "max_sigma_relative_delta": float(deltas.max()),
    })


def _cmd_train(config: RunConfig) -> None:
    from .core.artifacts import load_embedding, save_model
    from .core.downstream import train_inner_product, train_logistic_on_embedding

    data = _load_dataset(config)
    emb = load_embedding(config.embedding)
    solver = config.solver_config()
    if config.decoder == "inner-product":
        model = train_inner_product(data, emb, solver)
    else:
        model = train_logistic_on_embedding(data, emb, solver, config.epochs, config.lr, config.seed, progress=True)
    save_model(model, config.output)
    logger.info(f"{model.kind.value} model written to {config.output}")


def _cmd_predict(config: RunConfig) -> None:
    from .core.artifacts import load_model, save_predictions
    from .core.downstream import predict_topk

    model = load_model(config.model)
    classes = config.classes or model.c
    data = _load_dataset(config.model_copy(update={"features": config.features or model.d, "classes": classes}),
                         allow_unlabeled=True)
    predictions = predict_topk(model, data.X, config.topk)
    save_predictions(predictions, config.output)
    logger.info(f"Top-{predictions.shape[1]} predictions for {len(predictions)} examples written to {config.output}")


def _cmd_evaluate(config: RunConfig) -> None:
    from .core.artifacts import load_predictions, write_report
    from .core.downstream import evaluate

    data = _load_dataset(config, allow_unlabeled=True)
    report = evaluate(load_predictions(config.predictions), data.Y)
    print(f"test_error={report.test_error:.4f} precision_at_1={report.precision_at_1:.4f} n_eval={report.n_eval}")
    for k, value in report.precision_at_k.items():
        if k > 1:
            print(f"precision_at_{k}={value:.4f}")
    if config.output is not None:
        write_report(report.model_dump(), config.output)


def _cmd_synth(config: RunConfig) -> None:
    from .core.downstream import make_synthetic
    from .core.svmlight import save_svmlight

    train, test = make_synthetic(config.synth_spec())
    save_svmlight(train, config.output, config.labels_base, config.features_base)
    save_svmlight(test, config.test_output, config.labels_base, config.features_base)
    logger.info(f"Wrote {train.n} training examples to {config.output} and {test.n} test examples to {config.test_output}")


def _cmd_compare(config: RunConfig) -> None:
    import numpy as np

    from .core.downstream import compare_methods

    seeds = list(range(config.seed, config.seed + config.seeds))
    results = compare_methods(config.synth_spec(), config.k, config.solver_config(), seeds, p=config.p, q=config.q,
                              decoder=config.decoder, epochs=config.epochs, lr=config.lr, progress=True)
    metric = "median_acc" if config.decoder == "inner-product" else "median_p@1"
    print(f"{'method':<8} {metric:>10} {'min':>8} {'max':>8}")
    for name, accs in results.items():
        print(f"{name:<8} {np.median(accs):>10.4f} {min(accs):>8.4f} {max(accs):>8.4f}")


HANDLERS = {
    Command.EMBED: _cmd_embed,
    Command.ORACLE_CHECK: _cmd_oracle_check,
    Command.TRAIN: _cmd_train,
    Command.PREDICT: _cmd_predict,
    Command.EVALUATE: _cmd_evaluate,
    Command.SYNTH: _cmd_synth,
    Command.COMPARE: _cmd_compare,
}


def _diagnostic(category: str, code: int, message: str) -> int:
    print(f"error category={category} code={code} message={json.dumps(message)}", file=sys.stderr)
    return code


def run(config: RunConfig) -> int:
    """Execute one command; returns the process exit status"""
    if config.deterministic:
        for var in THREAD_ENV_VARS:
            os.environ.setdefault(var, "1")
    try:
        HANDLERS[config.command](config)
    except RembedError as e:
        return _diagnostic(e.category, e.exit_code, str(e))
    except ValidationError as e:
        return _diagnostic("validation", 2, str(e).replace("\n", " "))
    except OSError as e:
        return _diagnostic("io", IO_EXIT_CODE, str(e))
    except Exception as e:
        logger.debug("unexpected failure", exc_info=True)
        return _diagnostic("internal", INTERNAL_EXIT_CODE, f"{type(e).__name__}: {e}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rembed", description="Randomized label embeddings for large output spaces")
    parser.add_argument("command", choices=[c.value for c in Command])
    parser.add_argument("--input", type=Path)
    parser.add_argument("--output", type=Path)
    parser.add_argument("--test-output", type=Path)
    parser.add_argument("--embedding", type=Path)
    parser.add_argument("--model", type=Path)
    parser.add_argument("--predictions", type=Path)
    parser.add_argument("--report", type=Path)

    parser.add_argument("--method", default="rembrandt", choices=["rembrandt", "cs", "oracle"])
    parser.add_argument("--k", type=int, default=10)
    parser.add_argument("--p", type=int, default=DEFAULT_OVERSAMPLING)
    parser.add_argument("--q", type=int, default=DEFAULT_POWER_ITERS)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--ridge", type=float, default=None, help="ridge lambda (default: data-scaled)")
    parser.add_argument("--tol", type=float, default=DEFAULT_TOL)
    parser.add_argument("--max-iters", type=int, default=DEFAULT_MAX_ITERS)
    parser.add_argument("--normalize-labels", action="store_true")

    parser.add_argument("--labels-base", type=int, default=DEFAULT_LABELS_BASE)
    parser.add_argument("--features-base", type=int, default=DEFAULT_FEATURES_BASE)
    parser.add_argument("--features", type=int, default=None)
    parser.add_argument("--classes", type=int, default=None)

    parser.add_argument("--decoder", default="inner-product", choices=["inner-product", "logistic"])
    parser.add_argument("--topk", type=int, default=DEFAULT_TOPK)
    parser.add_argument("--epochs", type=int, default=DEFAULT_EPOCHS)
    parser.add_argument("--lr", type=float, default=DEFAULT_LEARNING_RATE)

    parser.add_argument("--n", type=int, default=2000)
    parser.add_argument("--d", type=int, default=50)
    parser.add_argument("--c", type=int, default=30)
    parser.add_argument("--rank", type=int, default=5)
    parser.add_argument("--noise", type=float, default=0.05)
    parser.add_argument("--labels-per-example", type=int, default=1)
    parser.add_argument("--density", type=float, default=0.2)
    parser.add_argument("--seeds", type=int, default=20)

    parser.add_argument("--deterministic", action=argparse.BooleanOptionalAction, default=True)
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = vars(build_parser().parse_args(argv))
    logging.basicConfig(level=args.pop("log_level"), stream=sys.stderr,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        config = RunConfig(**args)
    except ValidationError as e:
        return _diagnostic("validation", 2, str(e).replace("\n", " "))
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
