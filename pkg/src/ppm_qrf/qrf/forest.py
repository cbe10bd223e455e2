"""Quantile regression forest: tree fitting and weight-based queries."""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from ..event_log import EmptyDataset, FeatureEncoder, FeatureVector
from ._kernels import apply_tree, grow_tree, predict_rows, splitmix64

# weighted CDF values within this distance below alpha count as reaching it;
# absorbs summation-order rounding when alpha sits exactly on a CDF step
CDF_TOL = 1e-12

FULL = "full"
BOOTSTRAP = "bootstrap"


@dataclass(frozen=True)
class Hyperparameters:
    mtry: int
    trees: int
    min_n: int
    seed: int = 0

    def __post_init__(self):
        if self.mtry < 1:
            raise ValueError("mtry must be >= 1")
        if self.trees < 1:
            raise ValueError("trees must be >= 1")
        if self.min_n < 2:
            raise ValueError("min_n must be >= 2")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def to_dict(self) -> dict:
        return {"mtry": self.mtry, "trees": self.trees, "min_n": self.min_n, "seed": self.seed}


# best configuration reported for the manufacturing log
TUNED_DEFAULTS = Hyperparameters(mtry=70, trees=100, min_n=20)


def default_mtry(n_features: int) -> int:
    return max(1, int(math.floor(math.sqrt(n_features))))


def tree_seed(seed: int, index: int) -> int:
    return (seed ^ splitmix64(index)) & ((1 << 64) - 1)


@dataclass(frozen=True, eq=False)
class RegressionTree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    leaf_members: Mapping[int, np.ndarray]
    tree_seed: int

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def leaves(self) -> list[int]:
        return sorted(self.leaf_members)

    def apply(self, X: np.ndarray) -> np.ndarray:
        X = np.ascontiguousarray(np.atleast_2d(X), dtype=float)
        return apply_tree(X, self.feature, self.threshold, self.left, self.right)


def _leaf_members(leaf_of: np.ndarray, rows: np.ndarray) -> dict[int, np.ndarray]:
    order = np.lexsort((rows, leaf_of))
    leaf_sorted = leaf_of[order]
    cuts = np.flatnonzero(np.diff(leaf_sorted)) + 1
    return {int(chunk_leaf[0]): rows[chunk]
            for chunk, chunk_leaf in zip(np.split(order, cuts), np.split(leaf_sorted, cuts))}


def fit_tree(X: np.ndarray, y: np.ndarray, hp: Hyperparameters, seed: int,
             weight_basis: str = FULL, bootstrap: bool = True) -> RegressionTree:
    """Grow one tree on a bootstrap resample of ``(X, y)``.

    Leaf membership is computed over the full training set by default
    (``weight_basis="full"``); ``"bootstrap"`` keeps the resampled rows with
    their multiplicity instead.
    """
    X = np.ascontiguousarray(X, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    n, p = X.shape
    if n == 0:
        raise EmptyDataset("cannot fit a tree on an empty dataset")
    mtry = hp.mtry
    if mtry > p:
        warnings.warn(f"mtry={mtry} exceeds {p} features; clamped", stacklevel=2)
        mtry = p
    rng = np.random.default_rng(seed)
    sample = rng.integers(0, n, size=n) if bootstrap else np.arange(n)
    feature, threshold, left, right, _ = grow_tree(
        np.ascontiguousarray(X.T), y, sample.astype(np.int64), mtry, hp.min_n, np.uint64(splitmix64(seed)))
    tree = RegressionTree(feature, threshold, left, right, {}, seed)
    if weight_basis == FULL:
        rows = np.arange(n)
        members = _leaf_members(tree.apply(X), rows)
    elif weight_basis == BOOTSTRAP:
        rows = np.sort(sample)
        members = _leaf_members(tree.apply(X[rows]), rows)
    else:
        raise ValueError(f"unknown weight basis {weight_basis!r}")
    object.__setattr__(tree, "leaf_members", members)
    return tree


@dataclass(frozen=True, eq=False)
class QrfModel:
    forest: tuple[RegressionTree, ...]
    train_targets: np.ndarray
    hyperparameters: Hyperparameters
    encoder: FeatureEncoder | None = None
    weight_basis: str = FULL

    def __post_init__(self):
        object.__setattr__(self, "forest", tuple(self.forest))
        n = len(self.train_targets)
        for tree in self.forest:
            for members in tree.leaf_members.values():
                if len(members) == 0 or members.max() >= n:
                    raise ValueError("leaf members must be non-empty training indices")

    @property
    def k(self) -> int:
        return len(self.forest)

    @property
    def n_train(self) -> int:
        return len(self.train_targets)

    @cached_property
    def packed(self) -> dict:
        """Forest flattened into contiguous arrays for compiled queries."""
        uniq, inverse = np.unique(self.train_targets, return_inverse=True)
        offsets = np.cumsum([0] + [t.n_nodes for t in self.forest])
        total = int(offsets[-1])
        feature = np.empty(total, dtype=np.int64)
        threshold = np.empty(total)
        left = np.empty(total, dtype=np.int64)
        right = np.empty(total, dtype=np.int64)
        counts = np.zeros(total + 1, dtype=np.int64)
        leaf_mean = np.zeros(total)
        chunks = []
        for t, tree in enumerate(self.forest):
            off = int(offsets[t])
            sl = slice(off, off + tree.n_nodes)
            feature[sl] = tree.feature
            threshold[sl] = tree.threshold
            left[sl] = np.where(tree.left >= 0, tree.left + off, -1)
            right[sl] = np.where(tree.right >= 0, tree.right + off, -1)
            for leaf in range(tree.n_nodes):
                members = tree.leaf_members.get(leaf)
                if members is None:
                    continue
                counts[off + leaf + 1] = len(members)
                leaf_mean[off + leaf] = self.train_targets[members].mean()
                chunks.append((off + leaf, np.sort(inverse[members])))
        ptr = np.cumsum(counts)
        ranks = np.empty(ptr[-1], dtype=np.int64)
        for node, r in chunks:
            ranks[ptr[node]:ptr[node + 1]] = r
        nodes = np.column_stack([feature, threshold, left, right]).astype(float)
        return {
            "roots": offsets[:-1].astype(np.int64), "nodes": np.ascontiguousarray(nodes),
            "leaf_ptr": ptr, "leaf_ranks": ranks,
            "leaf_mean": leaf_mean, "uniq": uniq,
        }


def fit_forest(X: np.ndarray, y: np.ndarray, hp: Hyperparameters, encoder: FeatureEncoder | None = None,
               weight_basis: str = FULL, workers: int = 1) -> QrfModel:
    """Fit ``hp.trees`` trees; results do not depend on ``workers``."""
    X = np.ascontiguousarray(X, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    if len(y) == 0:
        raise EmptyDataset("cannot fit a forest on an empty dataset")
    if hp.mtry > X.shape[1]:
        warnings.warn(f"mtry={hp.mtry} exceeds {X.shape[1]} features; clamped", stacklevel=2)
        hp_fit = Hyperparameters(X.shape[1], hp.trees, hp.min_n, hp.seed)
    else:
        hp_fit = hp
    seeds = [tree_seed(hp.seed, t) for t in range(hp.trees)]

    def one(s):
        return fit_tree(X, y, hp_fit, s, weight_basis)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            trees = list(pool.map(one, seeds))
    else:
        trees = [one(s) for s in seeds]
    return QrfModel(tuple(trees), y.copy(), hp, encoder, weight_basis)


def _row(x) -> np.ndarray:
    values = x.values if isinstance(x, FeatureVector) else x
    return np.ascontiguousarray(np.asarray(values, dtype=float).reshape(1, -1))


def forest_weights(model: QrfModel, x) -> np.ndarray:
    """Observation weights ``w_i(x)``: per-tree leaf-share averaged over trees."""
    row = _row(x)
    w = np.zeros(model.n_train)
    for tree in model.forest:
        members = tree.leaf_members[int(tree.apply(row)[0])]
        np.add.at(w, members, 1.0 / len(members))
    return w / model.k


def conditional_cdf(model: QrfModel, x, y: float) -> float:
    w = forest_weights(model, x)
    return float(w[model.train_targets <= y].sum())


def _check_alpha(alpha: float):
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")


def quantile_from_weights(targets: np.ndarray, weights: np.ndarray, alpha: float) -> float:
    """Smallest target whose cumulative weight reaches ``alpha``.

    Equal target values have their weights pooled before comparison.
    """
    uniq, inverse = np.unique(targets, return_inverse=True)
    cdf = np.cumsum(np.bincount(inverse, weights=weights, minlength=len(uniq)))
    hit = np.flatnonzero(cdf >= alpha - CDF_TOL)
    return float(uniq[hit[0]] if len(hit) else uniq[-1])


def quantile_at(model: QrfModel, x, alpha: float) -> float:
    _check_alpha(alpha)
    return quantile_from_weights(model.train_targets, forest_weights(model, x), alpha)


def _weighted_mean(targets: np.ndarray, w: np.ndarray) -> float:
    # rounding can push the dot product just outside the support; clip it back
    support = targets[w > 0]
    return float(np.clip(np.dot(w, targets), support.min(), support.max()))


def predict_mean(model: QrfModel, x) -> float:
    return _weighted_mean(model.train_targets, forest_weights(model, x))


@dataclass(frozen=True)
class PredictionInterval:
    lower: float
    upper: float
    point: float
    level: float

    def __post_init__(self):
        if self.lower > self.upper:
            raise ValueError("interval lower bound exceeds upper bound")
        if not 0.0 < self.level < 1.0:
            raise ValueError("level must lie in (0, 1)")

    @property
    def width(self) -> float:
        return self.upper - self.lower

    @property
    def rwidth(self) -> float:
        """Width relative to the point prediction; NaN when point <= 0."""
        return self.width / self.point if self.point > 0 else float("nan")


def level_alphas(level: float) -> tuple[float, float]:
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must lie in (0, 1), got {level}")
    alpha = (1.0 - level) / 2.0
    return alpha, 1.0 - alpha


def predict_interval(model: QrfModel, x, level: float = 0.90) -> PredictionInterval:
    lo_a, hi_a = level_alphas(level)
    w = forest_weights(model, x)
    return PredictionInterval(
        quantile_from_weights(model.train_targets, w, lo_a),
        quantile_from_weights(model.train_targets, w, hi_a),
        _weighted_mean(model.train_targets, w),
        level,
    )


def model_outputs(model: QrfModel, X: np.ndarray, alphas: Sequence[float],
                  workers: int = 1, chunk: int = 4096) -> tuple[np.ndarray, np.ndarray]:
    """Batched (mean, quantiles) for rows of ``X`` via the packed forest.

    Agrees with :func:`predict_mean` up to float summation order and with
    :func:`quantile_at` exactly.
    """
    X = np.ascontiguousarray(np.atleast_2d(X), dtype=float)
    alphas = np.asarray(alphas, dtype=float)
    for a in alphas:
        _check_alpha(a)
    pk = model.packed

    def run(block):
        return predict_rows(block, pk["roots"], pk["nodes"], pk["leaf_ptr"], pk["leaf_ranks"], pk["leaf_mean"], pk["uniq"], alphas, CDF_TOL)

    blocks = [X[i:i + chunk] for i in range(0, len(X), chunk)] or [X]
    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, blocks))
    else:
        parts = [run(b) for b in blocks]
    return np.concatenate([p[0] for p in parts]), np.vstack([p[1] for p in parts])


@dataclass(frozen=True, eq=False)
class BatchPrediction:
    point: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    level: float

    def __len__(self):
        return len(self.point)

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    def rwidth(self, epsilon: float = 0.0) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.point > epsilon, self.width / self.point, np.nan)

    def intervals(self) -> list[PredictionInterval]:
        return [PredictionInterval(float(l), float(u), float(p), self.level)
                for l, u, p in zip(self.lower, self.upper, self.point)]


def predict_batch(model: QrfModel, X: np.ndarray, level: float = 0.90, workers: int = 1) -> BatchPrediction:
    lo_a, hi_a = level_alphas(level)
    mean, q = model_outputs(model, X, (lo_a, hi_a), workers=workers)
    return BatchPrediction(mean, q[:, 0], q[:, 1], level)
