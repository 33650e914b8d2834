"""Score-based performance metrics.

The decision rule used everywhere in this package is the "simple anomaly
predictor": pick a threshold at the empirical (1 - target_fpr) quantile of
the healthy scores and predict faulty for any score strictly above it.  The
false negative rate is then the faulty empirical CDF at that threshold
(score <= threshold), so the two rates are exact complements of one decision
rule.  AUCROC follows the pair-counting definition -- the fraction of
(faulty, healthy) score pairs where the faulty one is higher -- computed via
rank statistics in O(n log n) with ties counting one half (Mann-Whitney
convention, which makes "all scores identical" come out at 0.5).

Quantiles use type-7 linear interpolation (position h = (n-1)*q).  This is
the one quantile definition shared by every consumer in the package,
centralized here so it could be swapped in a single place.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.stats

__all__ = [
    "EmptySampleError",
    "ScoreSet",
    "ThresholdReport",
    "empirical_quantile",
    "threshold_for_fpr",
    "fpr_at_threshold",
    "fnr_at_threshold",
    "aucroc",
    "tradeoff_curve",
    "threshold_report",
    "mse",
]


class EmptySampleError(ValueError):
    """A rate or quantile was requested from an empty sample."""


def _checked(scores, name: str) -> np.ndarray:
    a = np.asarray(scores, dtype=np.float64).ravel()
    if a.size == 0:
        raise EmptySampleError(f"{name} is empty")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite values")
    return a


@dataclass(frozen=True)
class ScoreSet:
    """Anomaly scores of one evaluation, split by true class."""

    healthy: np.ndarray
    faulty: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "healthy", _checked(self.healthy, "healthy scores"))
        object.__setattr__(self, "faulty", _checked(self.faulty, "faulty scores"))

    def swapped(self) -> "ScoreSet":
        return ScoreSet(healthy=self.faulty, faulty=self.healthy)


@dataclass(frozen=True)
class ThresholdReport:
    threshold: float
    target_fpr: float
    achieved_fpr: float
    achieved_fnr: float


def empirical_quantile(scores, q: float) -> float:
    """Order-statistic quantile with type-7 linear interpolation.

    h = (n-1)*q; the result interpolates between the floor(h)-th and
    ceil(h)-th order statistics.  q=0 gives the minimum, q=1 the maximum.
    """
    a = _checked(scores, "scores")
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"q must be in [0, 1], got {q}")
    a = np.sort(a)
    h = (a.size - 1) * float(q)
    lo = int(np.floor(h))
    hi = min(lo + 1, a.size - 1)
    frac = h - lo
    return float(a[lo] + (a[hi] - a[lo]) * frac)


def threshold_for_fpr(healthy_scores, target_fpr: float) -> float:
    """Threshold at the empirical (1 - target_fpr) quantile of healthy scores.

    Classification rule: predict faulty iff score > threshold (strict).
    """
    return empirical_quantile(healthy_scores, 1.0 - float(target_fpr))


def fpr_at_threshold(healthy_scores, threshold: float) -> float:
    """Fraction of healthy scores strictly above the threshold."""
    a = _checked(healthy_scores, "healthy scores")
    return float(np.mean(a > threshold))


def fnr_at_threshold(faulty_scores, threshold: float) -> float:
    """Fraction of faulty scores <= threshold (exact empirical CDF).

    The complement of the strict decision rule: a faulty score exactly at
    the threshold is predicted healthy, hence counted as a false negative.
    """
    a = _checked(faulty_scores, "faulty scores")
    return float(np.mean(a <= threshold))


def aucroc(scores: ScoreSet) -> float:
    """Probability a random faulty score exceeds a random healthy one.

    Rank-based: equals the brute-force double sum over all
    n_faulty * n_healthy pairs with tied pairs counting 1/2.
    """
    nh, nf = scores.healthy.size, scores.faulty.size
    ranks = scipy.stats.rankdata(np.concatenate([scores.healthy, scores.faulty]))
    r_f = float(np.sum(ranks[nh:]))
    return (r_f - nf * (nf + 1) / 2.0) / (nf * nh)


def tradeoff_curve(scores: ScoreSet, fpr_grid) -> list[tuple[float, float]]:
    """(target_fpr, fnr) pairs along a strictly increasing FPR grid.

    FNR is nonincreasing along the grid: a larger tolerated FPR can only
    lower the threshold.
    """
    grid = np.asarray(fpr_grid, dtype=np.float64).ravel()
    if grid.size == 0:
        raise EmptySampleError("fpr grid is empty")
    if np.any(grid <= 0.0) or np.any(grid >= 1.0):
        raise ValueError("grid values must lie in (0, 1)")
    if np.any(np.diff(grid) <= 0.0):
        raise ValueError("grid must be strictly increasing")
    out = []
    for t in grid:
        thr = threshold_for_fpr(scores.healthy, t)
        out.append((float(t), fnr_at_threshold(scores.faulty, thr)))
    return out


def threshold_report(scores: ScoreSet, target_fpr: float) -> ThresholdReport:
    """Apply the simple anomaly predictor at one target FPR."""
    thr = threshold_for_fpr(scores.healthy, target_fpr)
    return ThresholdReport(
        threshold=thr,
        target_fpr=float(target_fpr),
        achieved_fpr=fpr_at_threshold(scores.healthy, thr),
        achieved_fnr=fnr_at_threshold(scores.faulty, thr),
    )


def mse(pairs) -> float:
    """Mean squared (test - validation) difference; metrics given in percent."""
    a = np.asarray(pairs, dtype=np.float64)
    if a.size == 0:
        raise EmptySampleError("no (validation, test) pairs")
    if a.ndim != 2 or a.shape[1] != 2:
        raise ValueError("pairs must be (n, 2): (validation, test)")
    d = a[:, 1] - a[:, 0]
    return float(np.mean(d * d))
