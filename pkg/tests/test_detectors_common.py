import numpy as np
import pytest

from imbalancebench.detectors import (
    DetectorSpec,
    FitError,
    Standardizer,
    default_suite,
    detector_category,
    fit,
    grid_from_mapping,
)
from imbalancebench.synth import LabeledDataset

ALL_DETECTORS = ["knn", "lof", "cblof", "iforest", "ocsvm", "xgbod", "svm", "xgb"]

SANE_HP = {
    "knn": {"n_neighbors": 5},
    "lof": {"n_neighbors": 5},
    # one blob clusters evenly: the 0.9n cumulative rule needs k >= 10
    "cblof": {"n_clusters": 10},
    "iforest": {"n_estimators": 100, "max_samples": "auto", "random_state": 0},
    "ocsvm": {"kernel": "rbf", "gamma": "scale", "nu": 0.5},
    "xgbod": {"random_state": 1},
    "svm": {"kernel": "rbf", "gamma": "scale", "c": 1.0},
    "xgb": {},
}


def displaced_data(rng, d=3, n_healthy=300, n_faulty=30, shift=10.0):
    Xh = rng.standard_normal((n_healthy, d))
    Xf = rng.standard_normal((n_faulty, d)) + shift
    X = np.vstack([Xh, Xf])
    y = np.array([0] * n_healthy + [1] * n_faulty, dtype=np.int8)
    return LabeledDataset(X, y, seed=0)


class TestStandardizer:
    def test_round_trip_identity(self, rng):
        X = rng.standard_normal((50, 4)) * 7 + 3
        std = Standardizer.fit(X)
        np.testing.assert_allclose(std.inverse_transform(std.transform(X)), X, atol=1e-9)

    def test_zero_mean_unit_variance(self, rng):
        X = rng.standard_normal((200, 3)) * np.array([1.0, 10.0, 0.1]) + np.array([5, -2, 0])
        Z = Standardizer.fit(X).transform(X)
        np.testing.assert_allclose(Z.mean(axis=0), 0.0, atol=1e-9)
        np.testing.assert_allclose(Z.std(axis=0), 1.0, atol=1e-9)

    def test_constant_feature_passes_through_centered(self):
        X = np.column_stack([np.arange(10.0), np.full(10, 4.0)])
        std = Standardizer.fit(X)
        Z = std.transform(X)
        np.testing.assert_allclose(Z[:, 1], 0.0, atol=1e-12)
        np.testing.assert_allclose(std.inverse_transform(Z), X, atol=1e-9)


class TestSuiteDefinition:
    def test_names_and_categories(self):
        suite = default_suite()
        assert [s.name for s in suite] == ALL_DETECTORS
        cats = {s.name: s.category for s in suite}
        assert cats == {
            "knn": "US", "lof": "US", "cblof": "US", "iforest": "US", "ocsvm": "US",
            "xgbod": "SS", "svm": "FS", "xgb": "FS",
        }
        for name in ALL_DETECTORS:
            assert detector_category(name) == cats[name]

    def test_grid_sizes(self):
        sizes = {s.name: len(s.grid) for s in default_suite()}
        assert sizes == {
            "knn": 13, "lof": 13, "cblof": 5, "iforest": 75,
            "ocsvm": 24, "xgbod": 5, "svm": 54, "xgb": 1,
        }

    def test_grid_from_mapping_order(self):
        grid = grid_from_mapping({"a": [1, 2], "b": ["x", "y"]})
        assert grid == (
            {"a": 1, "b": "x"}, {"a": 1, "b": "y"}, {"a": 2, "b": "x"}, {"a": 2, "b": "y"},
        )

    def test_unknown_hyperparameter_rejected(self, rng):
        train = displaced_data(rng)
        with pytest.raises(ValueError):
            fit(default_suite(["knn"])[0], {"bogus": 3}, train)

    def test_inert_parameters_accepted(self, rng):
        train = displaced_data(rng)
        model = fit(default_suite(["knn"])[0], {"n_neighbors": 5, "contamination": 0.01}, train)
        assert np.all(np.isfinite(model.score(train.points[:5])))


class TestFitContract:
    @pytest.mark.parametrize("name", ALL_DETECTORS)
    def test_orientation_aucroc_above_09(self, name, rng):
        from imbalancebench.metrics import ScoreSet, aucroc

        train = displaced_data(rng)
        test = displaced_data(rng, n_healthy=200, n_faulty=100)
        model = fit(default_suite([name])[0], SANE_HP[name], train)
        scores = model.score(test.points)
        labels = np.asarray(test.labels)
        ss = ScoreSet(healthy=scores[labels == 0], faulty=scores[labels == 1])
        assert aucroc(ss) > 0.9

    @pytest.mark.parametrize("name", ALL_DETECTORS)
    def test_empty_points_empty_scores(self, name, rng):
        train = displaced_data(rng)
        model = fit(default_suite([name])[0], SANE_HP[name], train)
        out = model.score(np.empty((0, 3)))
        assert out.shape == (0,)

    @pytest.mark.parametrize("name", ALL_DETECTORS)
    def test_scoring_is_repeatable(self, name, rng):
        train = displaced_data(rng)
        model = fit(default_suite([name])[0], SANE_HP[name], train)
        q = rng.standard_normal((20, 3))
        assert np.array_equal(model.score(q), model.score(q))

    def test_one_class_detectors_train_on_healthy_only(self, rng):
        # the standardizer sees all rows, the model itself only healthy ones
        train = displaced_data(rng, n_healthy=120, n_faulty=12)
        knn = fit(default_suite(["knn"])[0], SANE_HP["knn"], train)
        assert knn.scorer.train.shape[0] == 120
        lof = fit(default_suite(["lof"])[0], SANE_HP["lof"], train)
        assert lof.scorer.train.shape[0] == 120
        ocsvm = fit(default_suite(["ocsvm"])[0], SANE_HP["ocsvm"], train)
        assert ocsvm.scorer.alpha.shape[0] == 120
        iforest = fit(default_suite(["iforest"])[0], SANE_HP["iforest"], train)
        assert iforest.scorer.psi == min(256, 120)

    def test_supervised_detectors_see_all_rows(self, rng):
        train = displaced_data(rng, n_healthy=120, n_faulty=12)
        svm = fit(default_suite(["svm"])[0], SANE_HP["svm"], train)
        assert svm.scorer.alpha.shape[0] == 132

    def test_dimension_mismatch_raises(self, rng):
        train = displaced_data(rng)
        model = fit(default_suite(["knn"])[0], {"n_neighbors": 3}, train)
        with pytest.raises(ValueError):
            model.score(np.zeros((3, 5)))

    def test_non_finite_scores_raise_fit_error(self, rng):
        from imbalancebench.detectors import register_detector
        from imbalancebench.detectors.base import US

        class _BadScorer:
            def score(self, X):
                return np.full(X.shape[0], np.nan)

        register_detector("test-nan", US, lambda X, y, hp: _BadScorer(), keys=set())
        train = displaced_data(rng)
        model = fit(DetectorSpec("test-nan", US, ({},)), {}, train)
        with pytest.raises(FitError):
            model.score(train.points[:3])
