"""Dispatch table mapping model-kind names onto trainers and predictors."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import factor, mfitr, neighborhood
from .data import Dataset, TimeBinner
from .errors import ConfigError
from .taxonomy import TaxonomyGraph

ALL_KINDS = ("knn", "time-knn", "als", "wals", "sgd", "svdpp",
             "time-svd", "time-svdpp", "mfitr", "time-mfitr")
KNN_KINDS = ("knn", "time-knn")
TAXONOMY_KINDS = ("mfitr", "time-mfitr")
TIME_KINDS = ("time-knn", "time-svd", "time-svdpp", "time-mfitr")


@dataclass
class KnnParams:
    K: int = 50
    num_parts: int = 300
    beta: float = 0.08  # only time-knn applies it

    def __post_init__(self):
        if self.K < 1 or self.num_parts < 1:
            raise ConfigError("K and num_parts must be >= 1")
        if self.beta < 0:
            raise ConfigError("beta must be >= 0")


def default_hyper(kind: str):
    if kind in KNN_KINDS:
        return KnnParams(beta=0.08 if kind == "time-knn" else 0.0)
    if kind in TAXONOMY_KINDS:
        return mfitr.default_mfitr_hyper(kind)
    if kind in factor.FACTOR_KINDS:
        return factor.default_hyper(kind)
    raise ConfigError(f"unknown model kind {kind!r}")


@dataclass
class TrainedModel:
    """A trained predictor plus the context it needs at prediction time."""

    kind: str
    model: object                 # FactorModel | MfitrModel | NeighborTable
    context: Dataset | None = None
    beta: float = 0.0
    report: list = field(default_factory=list)

    def predict(self, users, items, times, context: Dataset | None = None) -> np.ndarray:
        """Unclipped batch predictions; context overrides the training split
        used for rated-set lookups."""
        ctx = context if context is not None else self.context
        if self.kind in KNN_KINDS:
            return neighborhood.predict_knn_batch(users, items, times, self.model,
                                                  ctx, beta=self.beta)
        if self.kind in TAXONOMY_KINDS:
            return mfitr.predict_batch(self.model, users, items, times)
        return factor.predict_batch(self.model, users, items, times, ctx)


def train_model(kind: str, train: Dataset, hyper=None, seed: int = 0,
                validation: Dataset | None = None, taxonomy: TaxonomyGraph | None = None,
                binner: TimeBinner | None = None, threads: int = 1,
                weights: np.ndarray | None = None) -> TrainedModel:
    if kind not in ALL_KINDS:
        raise ConfigError(f"unknown model kind {kind!r}")
    if hyper is None:
        hyper = default_hyper(kind)
    if kind in TAXONOMY_KINDS and taxonomy is None:
        raise ConfigError(f"{kind} requires a taxonomy")
    if kind in KNN_KINDS:
        table = neighborhood.build_neighbors(train, K=hyper.K,
                                             num_parts=hyper.num_parts, threads=threads)
        beta = hyper.beta if kind == "time-knn" else 0.0
        return TrainedModel(kind, table, context=train, beta=beta)
    if kind in TAXONOMY_KINDS:
        n_items = max(train.num_items, taxonomy.num_nodes)
        model, report = mfitr.train_mfitr(kind, train, validation, taxonomy, hyper,
                                          threads=threads, seed=seed, binner=binner,
                                          num_items=n_items)
        return TrainedModel(kind, model, context=train, report=report)
    model, report = factor.train(kind, train, validation, hyper, threads=threads,
                                 seed=seed, binner=binner, weights=weights)
    return TrainedModel(kind, model, context=train, report=report)


def train_and_predict(spec, train: Dataset, target: Dataset,
                      taxonomy: TaxonomyGraph | None = None,
                      binner: TimeBinner | None = None, threads: int = 1) -> np.ndarray:
    """Train one ensemble member and score a target split (unclipped)."""
    trained = train_model(spec.kind, train, hyper=spec.hyper, seed=spec.seed,
                          taxonomy=taxonomy, binner=binner, threads=threads)
    return trained.predict(target.users, target.items, target.times)
