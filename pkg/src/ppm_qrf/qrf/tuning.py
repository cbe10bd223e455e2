"""Exhaustive hyperparameter grid search ranked by validation RMSE."""

from __future__ import annotations

import csv
import itertools
import json
from dataclasses import dataclass
from typing import Mapping, Sequence, TextIO

from ..event_log import Dataset
from ..metrics import AllExcluded, DEFAULT_EPSILON, interval_metrics, point_metrics
from .forest import Hyperparameters, fit_forest, predict_batch

GRID_AXES = ("mtry", "trees", "min_n")
LEADERBOARD_COLUMNS = ("mtry", "trees", "min_n", "rmse", "mae", "picp", "mpiw", "mrpiw")

# six equidistant values per axis, 6^3 = 216 candidates
DEFAULT_GRID = {
    "mtry": [5, 10, 15, 20, 25, 30],
    "trees": [50, 100, 150, 200, 250, 300],
    "min_n": [5, 10, 15, 20, 25, 30],
}


class EmptyGrid(ValueError):
    pass


@dataclass(frozen=True)
class LeaderboardRow:
    mtry: int
    trees: int
    min_n: int
    rmse: float
    mae: float
    picp: float
    mpiw: float
    mrpiw: float

    @property
    def hyperparameters(self) -> tuple[int, int, int]:
        return self.mtry, self.trees, self.min_n


def load_grid(source: TextIO | Mapping) -> dict[str, list[int]]:
    doc = json.load(source) if hasattr(source, "read") else dict(source)
    unknown = set(doc) - set(GRID_AXES)
    if unknown:
        raise ValueError(f"unknown grid axes: {sorted(unknown)}")
    return {axis: [int(v) for v in doc.get(axis, DEFAULT_GRID[axis])] for axis in GRID_AXES}


def grid_candidates(grid: Mapping[str, Sequence[int]]) -> list[tuple[int, int, int]]:
    axes = [list(grid.get(axis, ())) for axis in GRID_AXES]
    if any(len(a) == 0 for a in axes):
        raise EmptyGrid("every grid axis needs at least one value")
    return list(itertools.product(*axes))


def grid_search(train: Dataset, validation: Dataset, grid: Mapping[str, Sequence[int]],
                level: float = 0.90, seed: int = 0, epsilon: float = DEFAULT_EPSILON,
                workers: int = 1) -> tuple[Hyperparameters, list[LeaderboardRow]]:
    """Train one forest per grid combination and rank by validation RMSE.

    Ties keep grid enumeration order, so the result is deterministic.
    """
    rows = []
    for mtry, trees, min_n in grid_candidates(grid):
        hp = Hyperparameters(mtry, trees, min_n, seed)
        model = fit_forest(train.X, train.y, hp, workers=workers)
        pred = predict_batch(model, validation.X, level, workers=workers)
        pm = point_metrics(validation.y, pred.point)
        try:
            im = interval_metrics(validation.y, (pred.lower, pred.upper, pred.point), epsilon)
            picp, mpiw, mrpiw = im.picp, im.mpiw, im.mrpiw
        except AllExcluded:
            picp = float(((pred.lower <= validation.y) & (validation.y <= pred.upper)).mean())
            mpiw, mrpiw = float(pred.width.mean()), float("nan")
        rows.append(LeaderboardRow(mtry, trees, min_n, pm.rmse, pm.mae, picp, mpiw, mrpiw))
    rows.sort(key=lambda r: r.rmse)
    best = rows[0]
    return Hyperparameters(best.mtry, best.trees, best.min_n, seed), rows


def write_leaderboard(rows: Sequence[LeaderboardRow], sink: TextIO) -> None:
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(LEADERBOARD_COLUMNS)
    for r in rows:
        writer.writerow([r.mtry, r.trees, r.min_n] + [repr(float(getattr(r, c))) for c in LEADERBOARD_COLUMNS[3:]])
