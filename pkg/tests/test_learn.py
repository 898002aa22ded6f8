import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from parkcast.aggregate import FeatureVector
from parkcast.learn import (
    DT_CRITERIA,
    DT_MAX_FEATURES,
    DT_MIN_SAMPLES_SPLIT,
    DT_MIN_WEIGHT_FRACTION_LEAF,
    Dataset,
    GbtConfig,
    TrainedModel,
    TreeConfig,
    cross_validate,
    fit_gbt,
    fit_tree,
    gbt_staged_training_rmse,
    predict,
    predict_tree,
    rmse,
    train_decision_tree,
    train_gbt,
)


def fv(hour=12, weekday=1, week=10, year=2022, price=1.0, spots=20.0):
    return FeatureVector(year, week, weekday, hour, price, spots)


def hour_dataset(targets_by_hour, n=200, seed=0):
    rng = np.random.default_rng(seed)
    rows = []
    for _ in range(n):
        h = int(rng.integers(0, 24))
        rows.append((fv(hour=h), targets_by_hour(h)))
    return Dataset.from_rows(rows)


class TestRmse:
    def test_identical(self):
        assert rmse([1.0, 2.0], [1.0, 2.0]) == 0.0

    def test_hand_computed(self):
        assert rmse([0.0, 0.0], [3.0, 4.0]) == pytest.approx(math.sqrt(12.5))

    @given(st.lists(st.floats(-10, 10), min_size=1, max_size=30))
    def test_symmetric(self, xs):
        ys = [x + 1.0 for x in xs]
        assert rmse(xs, ys) == pytest.approx(rmse(ys, xs))

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            rmse([1.0], [1.0, 2.0])

    def test_empty(self):
        with pytest.raises(ValueError):
            rmse([], [])


class TestCrossValidate:
    def test_constant_target_scores_zero(self):
        data = hour_dataset(lambda h: 0.4)
        assert cross_validate(data, TreeConfig(), seed=1) == pytest.approx(0.0, abs=1e-12)

    def test_leave_one_out_matches_bruteforce(self):
        data = hour_dataset(lambda h: h / 23.0, n=9, seed=3)
        config = TreeConfig(min_samples_split=2)  # all features, deterministic fit
        got = cross_validate(data, config, folds=len(data), seed=5)
        per_row = []
        for i in range(len(data)):
            mask = np.ones(len(data), dtype=bool)
            mask[i] = False
            tree = fit_tree(data.X[mask], data.y[mask], config)
            pred = float(np.clip(predict_tree(tree, data.X[i : i + 1]), 0, 1)[0])
            per_row.append(abs(pred - data.y[i]))
        assert got == pytest.approx(float(np.mean(per_row)), abs=1e-12)

    def test_fold_sizes_differ_by_at_most_one(self):
        data = hour_dataset(lambda h: 0.5, n=23)
        sizes = []

        def fit(Xtr, ytr, fold):
            sizes.append(len(data) - len(ytr))
            return lambda Xte: np.zeros(len(Xte))

        from parkcast.learn import _cv_score

        _cv_score(data.X, data.y, fit, folds=5, seed=0)
        assert max(sizes) - min(sizes) <= 1
        assert sum(sizes) == len(data)

    def test_too_few_rows(self):
        data = hour_dataset(lambda h: 0.5, n=4)
        with pytest.raises(ValueError, match="too few rows"):
            cross_validate(data, TreeConfig(), folds=5, seed=0)

    def test_folds_below_two(self):
        data = hour_dataset(lambda h: 0.5, n=10)
        with pytest.raises(ValueError, match="folds"):
            cross_validate(data, TreeConfig(), folds=1, seed=0)


class TestDecisionTree:
    def test_constant_target(self):
        data = hour_dataset(lambda h: 0.4)
        model = train_decision_tree(data, seed=0)
        assert model.cv_rmse == 0.0
        assert predict(model, fv(hour=3)) == pytest.approx(0.4)

    def test_deterministic(self):
        data = hour_dataset(lambda h: h / 23.0)
        m1 = train_decision_tree(data, seed=9)
        m2 = train_decision_tree(data, seed=9)
        assert m1.hyperparameters == m2.hyperparameters
        assert m1.payload == m2.payload

    def test_config_within_search_space(self):
        data = hour_dataset(lambda h: h / 23.0, seed=2)
        for seed in range(5):
            hp = train_decision_tree(data, seed=seed).hyperparameters
            assert hp["min_samples_split"] in DT_MIN_SAMPLES_SPLIT
            assert 0.03 <= hp["min_samples_leaf_fraction"] <= 0.1
            assert hp["max_features_fraction"] in DT_MAX_FEATURES
            assert hp["criterion"] in DT_CRITERIA
            assert hp["min_weight_fraction_leaf"] in DT_MIN_WEIGHT_FRACTION_LEAF

    def test_leaf_constraint(self):
        n = 120
        data = hour_dataset(lambda h: h / 23.0, n=n, seed=4)
        frac = 0.07
        tree = fit_tree(
            data.X, data.y, TreeConfig(min_samples_leaf_fraction=frac), np.random.default_rng(0)
        )
        min_allowed = math.ceil(frac * n)

        def leaf_sizes(node):
            if "value" in node:
                return [node["n"]]
            return leaf_sizes(node["left"]) + leaf_sizes(node["right"])

        assert min(leaf_sizes(tree)) >= min_allowed

    def test_mae_criterion_uses_median_leaves(self):
        X = np.zeros((5, 6))
        y = np.array([0.0, 0.0, 0.1, 0.9, 1.0])
        tree = fit_tree(X, y, TreeConfig(criterion="absolute_error"))
        assert tree == {"value": 0.1, "n": 5}


class TestGbt:
    def test_step_function_learned(self):
        data = hour_dataset(lambda h: 0.0 if h < 12 else 1.0)
        model = train_gbt(data, seed=0)
        assert model.cv_rmse < 0.05
        assert predict(model, fv(hour=2)) == pytest.approx(0.0, abs=0.02)
        assert predict(model, fv(hour=22)) == pytest.approx(1.0, abs=0.02)

    def test_config_within_grid(self):
        data = hour_dataset(lambda h: h / 23.0, seed=6)
        hp = train_gbt(data, seed=0).hyperparameters
        assert hp["max_depth"] in (2, 3)
        assert hp["n_estimators"] in (50, 100)
        assert hp["learning_rate"] in (0.1, 0.25)

    def test_null_boost_predicts_mean(self):
        X = np.random.default_rng(0).random((30, 6))
        y = np.full(30, 0.37)
        payload = fit_gbt(X, y, GbtConfig(max_depth=1, n_estimators=1, learning_rate=0.1))
        assert payload["base"] == pytest.approx(0.37)
        pred = payload["base"] + payload["learning_rate"] * predict_tree(payload["trees"][0], X)
        assert np.allclose(pred, 0.37)

    def test_training_loss_monotone_in_stages(self):
        data = hour_dataset(lambda h: math.sin(h) * 0.3 + 0.5, n=300, seed=8)
        payload = fit_gbt(data.X, data.y, GbtConfig(max_depth=2, n_estimators=60, learning_rate=0.1))
        staged = gbt_staged_training_rmse(payload, data.X, data.y)
        assert all(b <= a + 1e-12 for a, b in zip(staged, staged[1:]))

    def test_deterministic(self):
        data = hour_dataset(lambda h: h / 23.0)
        assert train_gbt(data, seed=3).payload == train_gbt(data, seed=3).payload


class TestPredict:
    def test_clamped(self):
        model = TrainedModel(
            learner="gbt",
            hyperparameters={},
            cv_rmse=0.0,
            source_cluster=None,
            seed=0,
            payload={"base": 1.07, "learning_rate": 0.1, "max_depth": 1, "trees": []},
        )
        assert predict(model, fv()) == 1.0

    def test_pure(self):
        data = hour_dataset(lambda h: h / 23.0)
        model = train_gbt(data, seed=1)
        assert predict(model, fv(hour=9)) == predict(model, fv(hour=9))

    def test_serialization_roundtrip(self):
        data = hour_dataset(lambda h: h / 23.0)
        model = train_gbt(data, seed=1)
        clone = TrainedModel.from_dict(model.to_dict())
        X = data.X[:10]
        assert np.array_equal(model.predict_array(X), clone.predict_array(X))
