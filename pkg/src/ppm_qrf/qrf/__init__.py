"""Quantile regression forests: CART ensembles whose leaves weight training targets."""

from .forest import (
    BOOTSTRAP,
    CDF_TOL,
    FULL,
    TUNED_DEFAULTS,
    BatchPrediction,
    Hyperparameters,
    PredictionInterval,
    QrfModel,
    RegressionTree,
    conditional_cdf,
    default_mtry,
    fit_forest,
    fit_tree,
    forest_weights,
    level_alphas,
    model_outputs,
    predict_batch,
    predict_interval,
    predict_mean,
    quantile_at,
    quantile_from_weights,
    tree_seed,
)
from .persist import ModelFormatError, SchemaHashMismatch, load_model, save_model
from .tuning import (
    DEFAULT_GRID, GRID_AXES, LEADERBOARD_COLUMNS, EmptyGrid, LeaderboardRow, grid_candidates, grid_search, load_grid,
    write_leaderboard,
)

__all__ = [
    "BOOTSTRAP", "CDF_TOL", "FULL", "TUNED_DEFAULTS", "BatchPrediction", "Hyperparameters",
    "PredictionInterval", "QrfModel", "RegressionTree", "conditional_cdf", "default_mtry", "fit_forest",
    "fit_tree", "forest_weights", "level_alphas", "model_outputs", "predict_batch", "predict_interval",
    "predict_mean", "quantile_at", "quantile_from_weights", "tree_seed", "ModelFormatError",
    "SchemaHashMismatch", "load_model", "save_model", "DEFAULT_GRID", "GRID_AXES", "LEADERBOARD_COLUMNS", "EmptyGrid", "LeaderboardRow",
    "grid_candidates", "grid_search", "load_grid", "write_leaderboard",
]
