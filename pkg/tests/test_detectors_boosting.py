import numpy as np
import pytest

from imbalancebench.detectors import FitError, default_suite, fit
from imbalancebench.detectors.boosting import GradientBoostedTrees
from imbalancebench.detectors.xgbod import bank_specs
from imbalancebench.synth import LabeledDataset


def spec_of(name):
    return default_suite([name])[0]


def two_class(Xh, Xf):
    X = np.vstack([Xh, Xf])
    y = np.array([0] * len(Xh) + [1] * len(Xf), dtype=np.int8)
    return LabeledDataset(X, y, seed=0)


class TestBooster:
    def test_training_loss_nonincreasing(self, rng):
        X = rng.standard_normal((200, 4))
        y = (X[:, 0] + 0.3 * rng.standard_normal(200) > 0).astype(float)
        booster = GradientBoostedTrees(n_rounds=60).fit(X, y)
        losses = np.array(booster.train_losses_)
        assert np.all(np.diff(losses) <= 1e-12)

    def test_separable_data_fits_cleanly(self, rng):
        X = np.vstack([rng.standard_normal((50, 2)), rng.standard_normal((50, 2)) + 6])
        y = np.array([0.0] * 50 + [1.0] * 50)
        booster = GradientBoostedTrees().fit(X, y)
        margins = booster.predict_margin(X)
        assert np.all((margins > 0) == (y == 1))
        assert booster.train_losses_[-1] < 0.05

    def test_deterministic(self, rng):
        X = rng.standard_normal((120, 3))
        y = (rng.random(120) < 0.3).astype(float)
        q = rng.standard_normal((20, 3))
        a = GradientBoostedTrees(n_rounds=20).fit(X, y).predict_margin(q)
        b = GradientBoostedTrees(n_rounds=20).fit(X, y).predict_margin(q)
        assert np.array_equal(a, b)

    def test_constant_labels_yield_flat_margin(self, rng):
        X = rng.standard_normal((40, 2))
        booster = GradientBoostedTrees(n_rounds=5).fit(X, np.zeros(40))
        margins = booster.predict_margin(X)
        assert np.allclose(margins, margins[0])
        assert margins[0] < 0  # pushed toward the healthy side

    def test_depth_respected(self, rng):
        X = rng.standard_normal((100, 3))
        y = (rng.random(100) < 0.5).astype(float)
        booster = GradientBoostedTrees(n_rounds=3, max_depth=2).fit(X, y)
        for tree in booster.trees_:
            assert len(tree.feature) <= 2 ** (2 + 1) - 1


class TestXgbDetector:
    def test_score_is_margin_toward_faulty(self, rng):
        train = two_class(rng.standard_normal((80, 2)), rng.standard_normal((20, 2)) + 5)
        model = fit(spec_of("xgb"), {}, train)
        s = model.score(np.vstack([np.zeros((1, 2)), np.full((1, 2), 5.0)]))
        assert s[1] > s[0]

    def test_single_class_is_fit_error(self, rng):
        X = rng.standard_normal((30, 2))
        with pytest.raises(FitError):
            fit(spec_of("xgb"), {}, LabeledDataset(X, np.zeros(30, dtype=np.int8), seed=0))


class TestXgbod:
    def test_bank_composition(self):
        bank = bank_specs(800, random_state=3)
        names = [f.__name__ for f, _ in bank]
        assert names.count("fit_knn") == 3 and names.count("fit_lof") == 3
        assert names[-3:] == ["fit_iforest", "fit_cblof", "fit_ocsvm"]
        knn_ks = sorted(hp["n_neighbors"] for f, hp in bank if f.__name__ == "fit_knn")
        assert knn_ks == [3, 8, 40]  # 3, ceil(0.01*800), ceil(0.05*800)

    def test_augmented_features_standardized(self, rng):
        train = two_class(rng.standard_normal((150, 3)), rng.standard_normal((15, 3)) + 4)
        model = fit(spec_of("xgbod"), {"random_state": 1}, train)
        scorer = model.scorer
        aug = scorer._augment(model.standardizer.transform(train.points))
        n_bank = len(scorer.bank)
        assert aug.shape == (165, 3 + n_bank)
        bank_cols = aug[:, 3:]
        np.testing.assert_allclose(bank_cols.mean(axis=0), 0.0, atol=1e-9)
        np.testing.assert_allclose(bank_cols.std(axis=0), 1.0, atol=1e-6)

    def test_deterministic_per_seed(self, rng):
        train = two_class(rng.standard_normal((100, 2)), rng.standard_normal((10, 2)) + 4)
        q = rng.standard_normal((15, 2))
        a = fit(spec_of("xgbod"), {"random_state": 2}, train).score(q)
        b = fit(spec_of("xgbod"), {"random_state": 2}, train).score(q)
        assert np.array_equal(a, b)

    def test_seed_feeds_stochastic_bank_members(self, rng):
        train = two_class(rng.standard_normal((100, 2)), rng.standard_normal((10, 2)) + 4)
        q = rng.standard_normal((40, 2))
        a = fit(spec_of("xgbod"), {"random_state": 1}, train).score(q)
        b = fit(spec_of("xgbod"), {"random_state": 5}, train).score(q)
        assert not np.array_equal(a, b)

    def test_chunked_and_unchunked_scoring_agree(self, rng):
        train = two_class(rng.standard_normal((90, 2)), rng.standard_normal((12, 2)) + 4)
        model = fit(spec_of("xgbod"), {"random_state": 1}, train)
        q = rng.standard_normal((50, 2))
        whole = model.score(q)
        parts = np.concatenate([model.score(q[:17]), model.score(q[17:])])
        np.testing.assert_allclose(whole, parts, atol=1e-12)
