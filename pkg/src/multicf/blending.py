"""Ridge-regression combination of per-model predictions and the two-phase
train / refit-on-train+validation pipeline."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .data import Dataset
from .errors import ConfigError, PipelineError, ShapeError, SingularSystemError


@dataclass
class PredictionMatrix:
    """Aligned per-model prediction columns over a shared (user, item, time)
    key list with no duplicates."""

    keys: np.ndarray           # (n, 3) int64
    names: list[str]
    X: np.ndarray              # (n, M) float64

    def __post_init__(self):
        self.keys = np.asarray(self.keys, dtype=np.int64).reshape(-1, 3)
        self.X = np.asarray(self.X, dtype=np.float64)
        if self.X.ndim != 2 or self.X.shape[0] != self.keys.shape[0]:
            raise ShapeError("prediction columns must align with the key list")
        if len(self.names) != self.X.shape[1]:
            raise ShapeError("one name per column required")
        if len({tuple(k) for k in self.keys.tolist()}) != self.keys.shape[0]:
            raise ConfigError("duplicate keys in prediction matrix")

    @property
    def num_points(self) -> int:
        return self.X.shape[0]

    @property
    def num_models(self) -> int:
        return self.X.shape[1]

    def column(self, name: str) -> np.ndarray:
        return self.X[:, self.names.index(name)]

    @classmethod
    def from_columns(cls, keys, named_columns: Sequence[tuple[str, np.ndarray]]
                     ) -> "PredictionMatrix":
        names = [n for n, _ in named_columns]
        X = np.column_stack([np.asarray(c, dtype=np.float64) for _, c in named_columns])
        return cls(np.asarray(keys), names, X)


@dataclass
class BlendWeights:
    names: list[str]
    w: np.ndarray
    lam: float

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=np.float64)
        if self.w.size != len(self.names):
            raise ShapeError("one weight per model required")


def _ridge_solve(X: np.ndarray, y: np.ndarray, lam: float) -> np.ndarray:
    A = X.T @ X + lam * np.eye(X.shape[1])
    b = X.T @ y
    try:
        return np.linalg.solve(A, b)
    except np.linalg.LinAlgError:
        raise SingularSystemError(
            "normal equations are singular; use lam > 0") from None


def ridge_weights(X: PredictionMatrix, y, lam: float) -> BlendWeights:
    """Solve (X^T X + lam I) w = X^T y directly. No intercept column is added;
    append a constant column beforehand if one is wanted."""
    if lam < 0:
        raise ConfigError("lam must be >= 0")
    y = np.asarray(y, dtype=np.float64)
    if y.size != X.num_points:
        raise ShapeError(f"target length {y.size} != {X.num_points} rows")
    return BlendWeights(list(X.names), _ridge_solve(X.X, y, lam), lam)


def blend_predict(Xhat: PredictionMatrix, weights: BlendWeights) -> np.ndarray:
    """Per-row weighted sum of model columns; unclipped (clipping happens on
    emission)."""
    if Xhat.num_models != weights.w.size:
        raise ShapeError(f"{Xhat.num_models} columns vs {weights.w.size} weights")
    return Xhat.X @ weights.w


RIDGE_GRID = tuple(np.logspace(-6, 2, 9))


def select_ridge_lambda(X: PredictionMatrix, y, grid: Sequence[float] = RIDGE_GRID,
                        folds: int = 5, seed: int = 0) -> float:
    """Pick lam from the grid by k-fold cross-validation on the given points."""
    y = np.asarray(y, dtype=np.float64)
    n = y.size
    if n < folds:
        folds = max(2, n)
    perm = np.random.default_rng([seed, 7]).permutation(n)
    bounds = np.linspace(0, n, folds + 1).astype(int)
    best_lam, best_err = None, np.inf
    for lam in grid:
        sse = 0.0
        for f in range(folds):
            test_idx = perm[bounds[f]:bounds[f + 1]]
            train_idx = np.concatenate([perm[:bounds[f]], perm[bounds[f + 1]:]])
            if train_idx.size == 0 or test_idx.size == 0:
                continue
            try:
                w = _ridge_solve(X.X[train_idx], y[train_idx], float(lam))
            except SingularSystemError:
                sse = np.inf
                break
            resid = X.X[test_idx] @ w - y[test_idx]
            sse += float(resid @ resid)
        if sse < best_err:
            best_err, best_lam = sse, float(lam)
    if best_lam is None:
        raise SingularSystemError("no ridge lam in the grid produced a solvable system")
    return best_lam


@dataclass
class ModelSpec:
    """Everything needed to train one ensemble member reproducibly."""

    name: str
    kind: str
    hyper: object
    seed: int = 0


@dataclass
class BlendReport:
    model_rmse: dict[str, float]
    blend_rmse: float
    lam: float
    weights: BlendWeights

    def tsv_lines(self) -> list[str]:
        out = ["model\tweight\tvalid_rmse"]
        for name, w in zip(self.weights.names, self.weights.w):
            out.append(f"{name}\t{w:.6f}\t{self.model_rmse[name]:.6f}")
        out.append(f"blend\t1.000000\t{self.blend_rmse:.6f}")
        return out


def two_phase_pipeline(model_specs: Sequence[ModelSpec], train: Dataset,
                       validation: Dataset, test: Dataset,
                       lam: float | None = None, threads: int = 1,
                       taxonomy=None, binner=None, cv_seed: int = 0,
                       ) -> tuple[np.ndarray, BlendWeights, BlendReport]:
    """Phase 1 trains every member on the training split and fits ridge
    weights against the validation truth; phase 2 retrains each member from
    the same seed and hyperparameters on train + validation and combines the
    test predictions with the phase-1 weights."""
    from .registry import train_and_predict  # local import to avoid a cycle

    if validation is None or len(validation) == 0:
        raise PipelineError("blending requires a non-empty validation split")
    if not model_specs:
        raise PipelineError("at least one model spec is required")
    names = [s.name for s in model_specs]
    if len(set(names)) != len(names):
        raise ConfigError("model spec names must be unique")

    val_keys = np.column_stack([validation.users, validation.items, validation.times])
    cols = []
    for spec in model_specs:
        pred = train_and_predict(spec, train, validation, taxonomy=taxonomy,
                                 binner=binner, threads=threads)
        cols.append((spec.name, pred))
    X_val = PredictionMatrix.from_columns(val_keys, cols)

    if lam is None:
        lam = select_ridge_lambda(X_val, validation.scores, seed=cv_seed)
    weights = ridge_weights(X_val, validation.scores, lam)

    scale = train.scale
    model_rmse = {
        name: float(np.sqrt(np.mean((scale.clip(X_val.column(name))
                                     - validation.scores) ** 2)))
        for name in X_val.names}
    blend_val = blend_predict(X_val, weights)
    blend_rmse = float(np.sqrt(np.mean((scale.clip(blend_val) - validation.scores) ** 2)))
    report = BlendReport(model_rmse, blend_rmse, lam, weights)

    union = train.concat(validation, split="train")
    test_keys = np.column_stack([test.users, test.items, test.times])
    cols2 = []
    for spec in model_specs:
        pred = train_and_predict(spec, union, test, taxonomy=taxonomy,
                                 binner=binner, threads=threads)
        cols2.append((spec.name, pred))
    X_test = PredictionMatrix.from_columns(test_keys, cols2)
    final = blend_predict(X_test, weights)
    return final, weights, report
