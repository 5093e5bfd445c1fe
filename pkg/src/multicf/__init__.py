"""Multicore collaborative filtering engine.

Rating predictors (item kNN, ALS/wALS, biased-MF SGD, SVD++, time-aware
variants, taxonomy-regularized MF), ridge blending of their predictions, a
synthetic data generator with planted structure, and a thread-based execution
layer with per-item locking and a scaling benchmark.
"""

__version__ = "0.1.0"

from .data import Dataset, RatingRecord, ScoreScale, TimeBinner, bin_of, load_ratings, save_ratings
from .synth import SynthConfig, generate_synthetic
from .taxonomy import ItemKind, TaxonomyGraph, load_taxonomy, save_taxonomy
from .errors import EngineError

__all__ = [
    "Dataset", "RatingRecord", "ScoreScale", "TimeBinner", "bin_of",
    "load_ratings", "save_ratings", "SynthConfig", "generate_synthetic",
    "ItemKind", "TaxonomyGraph", "load_taxonomy", "save_taxonomy",
    "EngineError", "__version__",
]
