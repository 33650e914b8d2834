import numpy as np
import pytest

from imbalancebench.detectors import DetectorSpec, FitError, default_suite, register_detector
from imbalancebench.detectors.base import FS, US
from imbalancebench.synth import LabeledDataset
from imbalancebench.tuning import (
    DetectorFailedError,
    InsufficientAnomaliesError,
    grid_search,
    plan_folds,
)


def make_train(rng, n_healthy, n_faulty, d=2, shift=4.0):
    X = np.vstack(
        [rng.standard_normal((n_healthy, d)), rng.standard_normal((n_faulty, d)) + shift]
    )
    y = np.array([0] * n_healthy + [1] * n_faulty, dtype=np.int8)
    return LabeledDataset(X, y, seed=0)


class TestPlanFolds:
    def test_even_faulty_split(self, rng):
        train = make_train(rng, 990, 10)
        plan = plan_folds(train, 5, seed=1)
        labels = np.asarray(train.labels)
        for f in range(5):
            held = plan.fold_of == f
            assert np.sum(labels[held] == 1) == 2
            assert np.sum(held) == 200

    def test_remainder_spread(self, rng):
        train = make_train(rng, 993, 7)
        plan = plan_folds(train, 5, seed=1)
        labels = np.asarray(train.labels)
        faulty_counts = sorted(
            int(np.sum(labels[plan.fold_of == f] == 1)) for f in range(5)
        )
        assert faulty_counts == [1, 1, 1, 2, 2]

    def test_minimum_case(self, rng):
        train = make_train(rng, 995, 5)
        plan = plan_folds(train, 5, seed=1)
        labels = np.asarray(train.labels)
        for f in range(5):
            held = plan.fold_of == f
            assert np.sum(labels[held] == 1) == 1
            assert np.sum(labels[held] == 0) == 199

    def test_insufficient_anomalies(self, rng):
        with pytest.raises(InsufficientAnomaliesError):
            plan_folds(make_train(rng, 100, 4), 5, seed=1)

    def test_partition_property(self, rng):
        train = make_train(rng, 83, 9)
        plan = plan_folds(train, 5, seed=2)
        assert plan.fold_of.shape == (92,)
        assert set(np.unique(plan.fold_of)) == {0, 1, 2, 3, 4}

    def test_random_configurations_satisfy_invariants(self, rng):
        # the fold-stratification sweep at module scale
        for _ in range(200):
            n_f = int(rng.integers(5, 60))
            n_h = int(rng.integers(n_f, 500))
            train = make_train(rng, n_h, n_f)
            plan = plan_folds(train, 5, seed=int(rng.integers(2**31)))
            labels = np.asarray(train.labels)
            totals = np.bincount(plan.fold_of, minlength=5)
            faulty = np.bincount(plan.fold_of[labels == 1], minlength=5)
            assert totals.max() - totals.min() <= 1
            assert faulty.max() - faulty.min() <= 1

    def test_deterministic_per_seed(self, rng):
        train = make_train(rng, 95, 15)
        a = plan_folds(train, 5, seed=7)
        b = plan_folds(train, 5, seed=7)
        c = plan_folds(train, 5, seed=8)
        assert np.array_equal(a.fold_of, b.fold_of)
        assert not np.array_equal(a.fold_of, c.fold_of)


class _DirectionalScorer:
    """Test detector: score = sign * x[0]; AUCROC flips with the sign."""

    def __init__(self, sign):
        self.sign = sign

    def score(self, X):
        return self.sign * X[:, 0]


register_detector("test-direction", FS, lambda X, y, hp: _DirectionalScorer(hp["sign"]), keys={"sign"})
register_detector(
    "test-fragile",
    FS,
    lambda X, y, hp: (_ for _ in ()).throw(FitError("test-fragile", hp, "always fails"))
    if hp["mode"] == "bad"
    else _DirectionalScorer(1.0),
    keys={"mode"},
)


class TestGridSearch:
    def test_single_point_grid(self, rng):
        train = make_train(rng, 120, 10)
        plan = plan_folds(train, 5, seed=3)
        spec = default_suite(["xgb"])[0]
        result = grid_search(spec, train, plan, 0.01)
        assert result.chosen_hp == {}
        assert 0.0 <= result.validation_aucroc <= 1.0
        assert result.excluded_hp_count == 0

    def test_argmax_selection(self, rng):
        # faulty points sit at +shift along x[0]: sign=+1 scores them high
        train = make_train(rng, 150, 15, shift=6.0)
        plan = plan_folds(train, 5, seed=4)
        spec = DetectorSpec("test-direction", FS, ({"sign": -1.0}, {"sign": 1.0}))
        result = grid_search(spec, train, plan, 0.01)
        assert result.chosen_hp == {"sign": 1.0}
        assert result.validation_aucroc > 0.95

    def test_tie_breaks_to_first_grid_entry(self, rng):
        train = make_train(rng, 150, 15, shift=6.0)
        plan = plan_folds(train, 5, seed=4)
        spec = DetectorSpec("test-direction", FS, ({"sign": 2.0}, {"sign": 1.0}))
        result = grid_search(spec, train, plan, 0.01)
        # identical rankings under monotone scaling -> identical AUCROC -> first wins
        assert result.chosen_hp == {"sign": 2.0}

    def test_erroring_grid_points_excluded(self, rng):
        train = make_train(rng, 150, 15, shift=6.0)
        plan = plan_folds(train, 5, seed=4)
        spec = DetectorSpec("test-fragile", FS, ({"mode": "bad"}, {"mode": "good"}))
        result = grid_search(spec, train, plan, 0.01)
        assert result.excluded_hp_count == 1
        assert result.chosen_hp == {"mode": "good"}

    def test_all_failed_raises(self, rng):
        train = make_train(rng, 150, 15)
        plan = plan_folds(train, 5, seed=4)
        spec = DetectorSpec("test-fragile", FS, ({"mode": "bad"},))
        with pytest.raises(DetectorFailedError):
            grid_search(spec, train, plan, 0.01)

    def test_heldout_never_seen_by_model(self, rng):
        seen_sets = []

        class _Probe:
            def __init__(self, X):
                self.train_rows = {tuple(row) for row in np.round(X, 9).tolist()}
                seen_sets.append(self.train_rows)

            def score(self, X):
                for row in np.round(X, 9).tolist():
                    assert tuple(row) not in self.train_rows, "held-out point was trained on"
                return X[:, 0]

        register_detector("test-probe", FS, lambda X, y, hp: _Probe(X), keys=set())
        train = make_train(rng, 95, 10)
        plan = plan_folds(train, 5, seed=5)
        grid_search(DetectorSpec("test-probe", FS, ({},)), train, plan, 0.01)
        assert len(seen_sets) == 5

    def test_reproducible(self, rng):
        train = make_train(rng, 140, 12)
        plan = plan_folds(train, 5, seed=6)
        spec = default_suite(["cblof"])[0]
        a = grid_search(spec, train, plan, 0.01)
        b = grid_search(spec, train, plan, 0.01)
        assert a == b

    def test_validation_rates_within_bounds(self, rng):
        train = make_train(rng, 200, 20, shift=5.0)
        plan = plan_folds(train, 5, seed=9)
        result = grid_search(default_suite(["knn"])[0], train, plan, 0.05)
        assert 0.0 <= result.validation_fpr <= 1.0
        assert 0.0 <= result.validation_fnr <= 1.0
        assert np.isfinite(result.validation_threshold)
