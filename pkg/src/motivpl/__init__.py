"""Predict survey-derived motivation factors from player features with ranking SVMs."""

from .domain import FACTORS, PLAY_STYLES, Dataset, FeatureSchema, clean, default_schema, load_csv, write_csv
from .pairwise import PairwiseDataset, transform
from .pipeline import DEFAULT_GRID, GridSpec, kfold_split, run_cv, run_experiment_suite
from .ranking import order_players, top_bottom_matrix
from .svm import TrainConfig, predict_preference, train

__version__ = "0.1.0"

__all__ = [
    "FACTORS", "PLAY_STYLES", "Dataset", "FeatureSchema", "clean", "default_schema", "load_csv", "write_csv",
    "PairwiseDataset", "transform", "DEFAULT_GRID", "GridSpec", "kfold_split", "run_cv", "run_experiment_suite",
    "order_players", "top_bottom_matrix", "TrainConfig", "predict_preference", "train", "__version__",
]
