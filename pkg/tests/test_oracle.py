import numpy as np
import pytest

from imbalancebench.metrics import ScoreSet, aucroc
from imbalancebench.oracle import estimate_gt_metrics, gt_score
from imbalancebench.synth import ScenarioSpec, TvSDistribution, build_tvs, sample

S1 = ScenarioSpec(d=2, mu=2.8, sigma2_a=0.05, sigma2_b=0.4)


def direct_density(mix, x):
    total = 0.0
    for mean, w in zip(mix.means, mix.weights):
        sq = float(np.sum((x - mean) ** 2))
        total += w * np.exp(-0.5 * sq / mix.variance) / (2 * np.pi * mix.variance) ** (mix.d / 2)
    return total


class TestGtScore:
    def test_equal_densities_score_zero(self):
        dist = build_tvs(S1)
        same = TvSDistribution(healthy=dist.healthy, faulty=dist.healthy, scenario=S1)
        x = np.array([0.4, -0.2])
        assert gt_score(same, x) == 0.0

    def test_negative_at_healthy_mode(self):
        dist = build_tvs(S1)
        assert gt_score(dist, np.zeros(2)) < 0.0

    def test_positive_on_the_shell(self):
        dist = build_tvs(S1)
        on_shell = np.asarray(dist.faulty.means)[0]
        assert gt_score(dist, on_shell) > 0.0

    def test_matches_direct_ratio_oracle(self, rng):
        dist = build_tvs(S1)
        checked = 0
        while checked < 50:
            x = rng.uniform(-3, 3, size=2)
            ph = direct_density(dist.healthy, x)
            pf = direct_density(dist.faulty, x)
            if ph < 1e-200 or pf < 1e-200:
                continue
            assert gt_score(dist, x) == pytest.approx(np.log(pf / ph), abs=1e-9)
            checked += 1

    def test_vectorized_matches_scalar(self, rng):
        dist = build_tvs(S1)
        pts = rng.uniform(-3, 3, size=(20, 2))
        vec = gt_score(dist, pts)
        for i in range(20):
            assert vec[i] == pytest.approx(gt_score(dist, pts[i]), abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            gt_score(build_tvs(S1), np.zeros(5))


class TestEstimateGtMetrics:
    def test_validation(self):
        dist = build_tvs(S1)
        with pytest.raises(ValueError):
            estimate_gt_metrics(dist, batches=0)
        with pytest.raises(ValueError):
            estimate_gt_metrics(dist, batch_size=1)
        with pytest.raises(ValueError):
            estimate_gt_metrics(dist, target_fpr=0.0)

    def test_quantile_consistency_at_half(self):
        dist = build_tvs(S1)
        gt = estimate_gt_metrics(dist, target_fpr=0.5, batches=16, batch_size=1024, seed=5)
        n_h = 16 * 512
        assert abs(gt.fpr - 0.5) <= 2.0 / np.sqrt(n_h)
        assert gt.n_points == 16 * 1024

    def test_monotone_fpr_fnr_tradeoff(self):
        dist = build_tvs(S1)
        fnrs = []
        for target in (0.005, 0.02, 0.08, 0.2):
            gt = estimate_gt_metrics(dist, target_fpr=target, batches=16, batch_size=1024, seed=5)
            fnrs.append(gt.fnr)
        assert all(a >= b for a, b in zip(fnrs, fnrs[1:]))

    def test_budget_doubling_stability(self):
        dist = build_tvs(S1)
        small = estimate_gt_metrics(dist, batches=32, batch_size=1024, seed=9)
        large = estimate_gt_metrics(dist, batches=64, batch_size=1024, seed=9)
        se = np.sqrt(small.fnr * (1 - small.fnr) / (32 * 512))
        assert abs(large.fnr - small.fnr) < 3 * se + 1e-9

    def test_deterministic(self):
        dist = build_tvs(S1)
        a = estimate_gt_metrics(dist, batches=8, batch_size=512, seed=3)
        b = estimate_gt_metrics(dist, batches=8, batch_size=512, seed=3)
        assert a == b

    def test_gt_beats_a_real_detector(self):
        # Bayes optimality, up to Monte-Carlo noise of 3 standard errors
        from imbalancebench.detectors import default_suite, fit
        from imbalancebench.synth import LabeledDataset

        dist = build_tvs(S1)
        train = LabeledDataset.concat(
            sample(dist, 0, 600, seed=21), sample(dist, 1, 40, seed=22), seed=21
        )
        test = LabeledDataset.concat(
            sample(dist, 0, 2000, seed=23), sample(dist, 1, 2000, seed=24), seed=23
        )
        labels = np.asarray(test.labels)
        knn = fit(default_suite(["knn"])[0], {"n_neighbors": 10}, train)
        knn_scores = knn.score(test.points)
        knn_auc = aucroc(ScoreSet(healthy=knn_scores[labels == 0], faulty=knn_scores[labels == 1]))
        g = gt_score(dist, test.points)
        gt_auc = aucroc(ScoreSet(healthy=g[labels == 0], faulty=g[labels == 1]))
        se = np.sqrt(gt_auc * (1 - gt_auc) / 2000)
        assert gt_auc >= knn_auc - 3 * se
