import io
import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import exact_cdf, exact_quantile, exact_weights, route
from ppm_qrf.event_log import EmptyDataset
from ppm_qrf.qrf import (
    BOOTSTRAP, DEFAULT_GRID, LEADERBOARD_COLUMNS, TUNED_DEFAULTS, EmptyGrid, Hyperparameters, ModelFormatError,
    QrfModel, RegressionTree, SchemaHashMismatch, conditional_cdf, default_mtry, fit_forest, fit_tree,
    forest_weights, grid_candidates, grid_search, load_grid, load_model, model_outputs, predict_batch,
    predict_interval, predict_mean, quantile_at, save_model, tree_seed, write_leaderboard,
)
from ppm_qrf.qrf.persist import model_from_dict, model_to_dict


def manual_tree(feature, threshold, left, right, X):
    tree = RegressionTree(np.array(feature), np.array(threshold, dtype=float), np.array(left), np.array(right), {}, 0)
    leaves = tree.apply(X)
    members = {int(l): np.flatnonzero(leaves == l) for l in np.unique(leaves)}
    return RegressionTree(tree.feature, tree.threshold, tree.left, tree.right, members, 0)


def single_leaf_model(y):
    X = np.zeros((len(y), 1))
    tree = manual_tree([-1], [0.0], [-1], [-1], X)
    return QrfModel((tree,), np.asarray(y, dtype=float), Hyperparameters(1, 1, 2))


@pytest.fixture
def two_tree_model():
    X = np.arange(4.0).reshape(-1, 1)
    a = manual_tree([0, -1, -1], [1.5, 0, 0], [1, -1, -1], [2, -1, -1], X)
    b = manual_tree([0, -1, 0, -1, -1], [0.5, 0, 1.5, 0, 0], [1, -1, 3, -1, -1], [2, -1, 4, -1, -1], X)
    return QrfModel((a, b), np.array([1.0, 2.0, 3.0, 4.0]), Hyperparameters(1, 2, 2))


def random_micro(rng):
    n = int(rng.integers(2, 31))
    p = int(rng.integers(1, 5))
    X = rng.integers(0, 6, size=(n, p)).astype(float)
    y = rng.integers(0, 12, size=n).astype(float) * rng.choice([1.0, 0.5, 2.25])
    hp = Hyperparameters(int(rng.integers(1, p + 1)), int(rng.integers(1, 4)), int(rng.integers(2, 7)),
                         int(rng.integers(0, 2**63)))
    return X, y, hp


class TestTreeGrowth:
    def test_constant_target_gives_single_leaf(self, rng):
        X = rng.normal(size=(30, 3))
        tree = fit_tree(X, np.full(30, 4.0), Hyperparameters(3, 1, 2), seed=1)
        assert tree.n_nodes == 1
        np.testing.assert_array_equal(tree.leaf_members[0], np.arange(30))

    def test_min_n_blocks_splitting(self, rng):
        X = rng.normal(size=(4, 2))
        model = fit_forest(X, np.array([1.0, 5.0, 2.0, 9.0]), Hyperparameters(2, 1, 100))
        assert model.forest[0].n_nodes == 1
        np.testing.assert_allclose(forest_weights(model, X[0]), 0.25)

    def test_separable_data_splits_between_classes(self):
        x1 = np.array([-3.0, -2.0, -1.0, -0.5, 0.0, 1.0, 2.0, 3.0])
        X = np.column_stack([x1, np.zeros(8)])
        y = np.where(x1 < 0, 0.0, 100.0)
        tree = fit_tree(X, y, Hyperparameters(2, 1, 2), seed=0, bootstrap=False)
        assert tree.feature[0] == 0
        assert -0.5 < tree.threshold[0] < 0.0

    def test_leaf_members_partition_training_rows(self, rng):
        X = rng.normal(size=(60, 4))
        y = X[:, 0] * 3 + rng.normal(size=60)
        tree = fit_tree(X, y, Hyperparameters(2, 1, 5), seed=9)
        rows = np.sort(np.concatenate(list(tree.leaf_members.values())))
        np.testing.assert_array_equal(rows, np.arange(60))
        for leaf, members in tree.leaf_members.items():
            assert all(route(tree, X[i]) == leaf for i in members)

    def test_bootstrap_basis_keeps_resampled_rows(self, rng):
        X = rng.normal(size=(40, 2))
        y = rng.normal(size=40)
        tree = fit_tree(X, y, Hyperparameters(2, 1, 5), seed=4, weight_basis=BOOTSTRAP)
        assert sum(len(m) for m in tree.leaf_members.values()) == 40
        assert len(np.unique(np.concatenate(list(tree.leaf_members.values())))) < 40

    def test_mtry_clamped_with_warning(self, rng):
        with pytest.warns(UserWarning):
            fit_tree(rng.normal(size=(10, 2)), rng.normal(size=10), Hyperparameters(5, 1, 2), seed=0)

    def test_empty_dataset(self):
        with pytest.raises(EmptyDataset):
            fit_forest(np.zeros((0, 2)), np.zeros(0), Hyperparameters(1, 1, 2))

    def test_hyperparameter_validation(self):
        for bad in ((0, 1, 2), (1, 0, 2), (1, 1, 1)):
            with pytest.raises(ValueError):
                Hyperparameters(*bad)
        assert (TUNED_DEFAULTS.mtry, TUNED_DEFAULTS.trees, TUNED_DEFAULTS.min_n) == (70, 100, 20)
        assert default_mtry(138) == 11

    def test_tree_seeds_are_distinct(self):
        seeds = {tree_seed(7, t) for t in range(500)}
        assert len(seeds) == 500


class TestWeightsAndQuantiles:
    def test_single_leaf_uniform_weights(self):
        model = single_leaf_model([1, 2, 3, 4])
        np.testing.assert_array_equal(forest_weights(model, [0.0]), [0.25] * 4)
        assert conditional_cdf(model, [0.0], 2) == 0.5
        assert conditional_cdf(model, [0.0], 0.5) == 0.0
        assert conditional_cdf(model, [0.0], 4) == 1.0
        assert quantile_at(model, [0.0], 0.5) == 2
        assert quantile_at(model, [0.0], 0.95) == 4
        assert quantile_at(model, [0.0], 1e-9) == 1
        assert predict_mean(model, [0.0]) == 2.5

    def test_two_trees_average_leaf_shares(self, two_tree_model):
        np.testing.assert_array_equal(forest_weights(two_tree_model, [1.0]), [0.25, 0.75, 0.0, 0.0])
        assert predict_mean(two_tree_model, [1.0]) == 1.75

    def test_ninety_percent_interval_over_twenty_values(self):
        model = single_leaf_model(np.arange(1, 21))
        iv = predict_interval(model, [0.0], 0.90)
        assert (iv.lower, iv.upper, iv.point) == (1, 19, 10.5)

    def test_constant_targets_collapse_interval(self, rng):
        model = fit_forest(rng.normal(size=(20, 2)), np.full(20, 7.0), Hyperparameters(2, 5, 2))
        iv = predict_interval(model, [0.1, 0.2])
        assert iv.lower == iv.upper == iv.point == 7.0
        assert iv.width == 0.0 and iv.rwidth == 0.0

    def test_single_observation(self):
        model = fit_forest(np.zeros((1, 1)), np.array([3.5]), Hyperparameters(1, 3, 2))
        assert predict_mean(model, [0.0]) == 3.5

    def test_alpha_outside_unit_interval(self):
        with pytest.raises(ValueError):
            quantile_at(single_leaf_model([1, 2]), [0.0], 1.0)

    def test_oracle_on_random_micro_forests(self, rng):
        for _ in range(40):
            X, y, hp = random_micro(rng)
            model = fit_forest(X, y, hp)
            x = rng.integers(0, 6, size=X.shape[1]).astype(float)
            w = exact_weights(model.forest, X, x)
            np.testing.assert_allclose(forest_weights(model, x), [float(v) for v in w], rtol=0, atol=1e-15)
            for a in (0.05, 0.1, 0.25, 0.5, 0.75, 0.95):
                assert quantile_at(model, x, a) == exact_quantile(list(y), w, a)
            assert conditional_cdf(model, x, float(np.median(y))) == pytest.approx(
                float(exact_cdf(list(y), w, float(np.median(y)))), abs=1e-12)


@pytest.fixture(scope="module")
def model():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(150, 4))
    y = np.exp(0.5 * X[:, 0] + 0.3 * rng.normal(size=150)) * 10
    return fit_forest(X, y, Hyperparameters(2, 12, 5, seed=21)), X


class TestForestProperties:
    @given(st.lists(st.floats(-3, 3), min_size=4, max_size=4))
    def test_weights_are_convex(self, model, x):
        w = forest_weights(model[0], x)
        assert w.min() >= 0 and abs(w.sum() - 1) <= 1e-9

    @given(st.lists(st.floats(-3, 3), min_size=4, max_size=4), st.floats(0, 60), st.floats(0, 60))
    def test_cdf_monotone(self, model, x, y1, y2):
        lo, hi = sorted((y1, y2))
        assert conditional_cdf(model[0], x, lo) <= conditional_cdf(model[0], x, hi)

    @given(st.lists(st.floats(-3, 3), min_size=4, max_size=4), st.floats(0.01, 0.99))
    def test_quantile_cdf_galois_connection(self, model, x, alpha):
        m = model[0]
        q = quantile_at(m, x, alpha)
        assert conditional_cdf(m, x, q) >= alpha - 1e-12
        below = m.train_targets[m.train_targets < q]
        if len(below):
            assert conditional_cdf(m, x, below.max()) < alpha

    @given(st.lists(st.floats(-3, 3), min_size=4, max_size=4), st.floats(0.05, 0.98), st.floats(0.05, 0.98))
    def test_intervals_nest(self, model, x, l1, l2):
        small, big = sorted((l1, l2))
        a, b = predict_interval(model[0], x, small), predict_interval(model[0], x, big)
        assert b.lower <= a.lower <= a.upper <= b.upper

    def test_mean_equals_weighted_targets(self, model):
        m, X = model
        for x in X[:20]:
            assert predict_mean(m, x) == pytest.approx(float(np.dot(forest_weights(m, x), m.train_targets)), rel=1e-14)

    def test_batched_path_matches_single_queries(self, model):
        m, X = model
        batch = predict_batch(m, X[:60], 0.8)
        for i, x in enumerate(X[:60]):
            iv = predict_interval(m, x, 0.8)
            assert (batch.lower[i], batch.upper[i]) == (iv.lower, iv.upper)
            assert batch.point[i] == pytest.approx(iv.point, rel=1e-12)

    def test_worker_count_does_not_change_forest(self):
        rng = np.random.default_rng(8)
        X, y = rng.normal(size=(200, 5)), rng.normal(size=200)
        hp = Hyperparameters(3, 16, 4, seed=77)
        a, b = fit_forest(X, y, hp, workers=1), fit_forest(X, y, hp, workers=4)
        assert json.dumps(model_to_dict(a)) == json.dumps(model_to_dict(b))
        ma, qa = model_outputs(a, X, (0.1, 0.9), workers=1)
        mb, qb = model_outputs(b, X, (0.1, 0.9), workers=3, chunk=17)
        np.testing.assert_array_equal(ma, mb)
        np.testing.assert_array_equal(qa, qb)


class TestPersistence:
    def test_round_trip(self, small_model, small_split, tmp_path):
        path = tmp_path / "model.json"
        save_model(small_model, path)
        back = load_model(path, expected_schema_hash=small_split.encoder.schema_hash())
        X = small_split.test.X
        a, b = predict_batch(small_model, X), predict_batch(back, X)
        np.testing.assert_array_equal(a.lower, b.lower)
        np.testing.assert_array_equal(a.point, b.point)
        doc = json.loads(path.read_text())
        assert {"version", "hyperparameters", "schema_hash", "trees", "train_targets"} <= set(doc)

    def test_schema_hash_mismatch(self, small_model, tmp_path):
        path = tmp_path / "model.json"
        save_model(small_model, path)
        with pytest.raises(SchemaHashMismatch):
            load_model(path, expected_schema_hash="0" * 64)

    def test_unknown_version(self, small_model):
        doc = model_to_dict(small_model)
        doc["version"] = 99
        with pytest.raises(ModelFormatError):
            model_from_dict(doc)


class TestGridSearch:
    def test_candidates(self):
        assert len(grid_candidates(DEFAULT_GRID)) == 216
        assert grid_candidates({"mtry": [1, 2], "trees": [3], "min_n": [4]}) == [(1, 3, 4), (2, 3, 4)]
        with pytest.raises(EmptyGrid):
            grid_candidates({"mtry": [], "trees": [1], "min_n": [2]})

    def test_load_grid(self):
        grid = load_grid(io.StringIO('{"mtry": [2, 4]}'))
        assert grid["mtry"] == [2, 4] and grid["trees"] == DEFAULT_GRID["trees"]
        with pytest.raises(ValueError):
            load_grid({"depth": [1]})

    def test_single_combination_wins(self, small_split):
        best, rows = grid_search(small_split.train, small_split.validation,
                                 {"mtry": [4], "trees": [5], "min_n": [10]}, seed=2)
        assert (best.mtry, best.trees, best.min_n, best.seed) == (4, 5, 10, 2)
        assert len(rows) == 1

    def test_leaderboard_sorted_and_written(self, small_split):
        grid = {"mtry": [2, 8], "trees": [3, 6], "min_n": [5, 30]}
        best, rows = grid_search(small_split.train, small_split.validation, grid, seed=1)
        assert len(rows) == 8
        assert [r.rmse for r in rows] == sorted(r.rmse for r in rows)
        assert (best.mtry, best.trees, best.min_n) == rows[0].hyperparameters
        buf = io.StringIO()
        write_leaderboard(rows, buf)
        lines = buf.getvalue().splitlines()
        assert lines[0] == ",".join(LEADERBOARD_COLUMNS) and len(lines) == 9
