from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

# Range finder defaults (oversampling p, power iterations q)
DEFAULT_OVERSAMPLING = 20
DEFAULT_POWER_ITERS = 1

# Least-squares solver
DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITERS = 1000
RIDGE_SCALE = 1e-6  # default lambda = RIDGE_SCALE * mean squared row norm of X
POLISH_ROUNDS = 3

# Orthogonalization / eigensolve
DROP_TOL = 1e-12  # relative to the largest column norm
SYMMETRY_TOL = 1e-8

# Brute-force oracle refuses anything larger than this many dense cells
ORACLE_MAX_CELLS = 10**7
IDEMPOTENCE_TOL = 1e-10

# Embedding file format
EMBEDDING_MAGIC = "REMBED"
EMBEDDING_VERSION = "v1"
ORTHONORMAL_WARN_TOL = 1e-6

# Normal variates: PCG64 uniform doubles through the Box-Muller transform.
# Bump the suffix whenever the transform or draw order changes.
RNG_ALGORITHM = "pcg64+box-muller/v1"

# svmlight dialect defaults
DEFAULT_LABELS_BASE = 0
DEFAULT_FEATURES_BASE = 1

# Downstream defaults
DEFAULT_TOPK = 5
DEFAULT_EPOCHS = 20
DEFAULT_LEARNING_RATE = 0.1
PRECISION_CUTOFFS = (1, 3, 5)
PREDICT_CHUNK_ROWS = 1024


class SolverConfig(BaseModel):
    """Ridge least-squares settings for the learning step"""

    model_config = ConfigDict(frozen=True)

    ridge_lambda: Optional[float] = Field(default=None, ge=0.0)
    tol: float = Field(default=DEFAULT_TOL, gt=0.0)
    max_iters: int = Field(default=DEFAULT_MAX_ITERS, ge=1)


class EmbedConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    k: int = Field(ge=1)
    p: int = Field(default=DEFAULT_OVERSAMPLING, ge=0)
    q: int = Field(default=DEFAULT_POWER_ITERS, ge=0)
    seed: int = Field(default=0, ge=0)
    solver: SolverConfig = Field(default_factory=SolverConfig)
    normalize_labels: bool = False


class SynthSpec(BaseModel):
    """Planted low-rank classification problem"""

    model_config = ConfigDict(frozen=True)

    n: int = Field(ge=2)
    d: int = Field(ge=1)
    c: int = Field(ge=2)
    true_rank: int = Field(ge=1)
    label_noise: float = Field(default=0.0, ge=0.0, lt=1.0)
    labels_per_example: int = Field(default=1, ge=1)
    density: float = Field(default=0.2, gt=0.0, le=1.0)
    test_fraction: float = Field(default=0.2, gt=0.0, lt=1.0)
    seed: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _check_shape(self):
        if self.true_rank > min(self.d, self.c):
            raise ValueError(f"true_rank {self.true_rank} exceeds min(d, c) = {min(self.d, self.c)}")
        if self.labels_per_example >= self.c:
            raise ValueError(f"labels_per_example {self.labels_per_example} must be below c = {self.c}")
        return self
