"""Bayes-optimal reference scoring and Monte-Carlo ground-truth metrics.

With both class densities known exactly, the optimal anomaly score for a
point x is the log-density ratio

    g(x) = log pdf_faulty(x) - log pdf_healthy(x),

oriented so higher means more anomalous; its sign reproduces the Bayes
classifier (predict faulty iff pdf_faulty > pdf_healthy).  Everything stays
in the log domain -- densities get vanishingly small in higher dimensions,
and log-sum-exp keeps the ratio finite for any finite x.

The ideal error rates of a scenario have no closed form here; they are
estimated by scoring large seeded Monte-Carlo batches (50/50 class mix, as
in the test protocol) and applying the simple anomaly predictor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._rng import stream
from .metrics import ScoreSet, aucroc, threshold_report
from .synth import TvSDistribution

__all__ = ["GroundTruthMetrics", "gt_score", "estimate_gt_metrics"]


@dataclass(frozen=True)
class GroundTruthMetrics:
    fpr: float
    fnr: float
    aucroc: float
    n_points: int  # total Monte-Carlo points = batches * batch_size
    target_fpr: float


def gt_score(dist: TvSDistribution, x):
    """Log-density ratio g(x); accepts a d-vector or an (n, d) matrix."""
    return dist.faulty.log_pdf(x) - dist.healthy.log_pdf(x)


def estimate_gt_metrics(
    dist: TvSDistribution,
    target_fpr: float = 0.01,
    batches: int = 10240,
    batch_size: int = 1024,
    seed: int = 0,
) -> GroundTruthMetrics:
    """Estimate ideal FPR/FNR/AUCROC for a scenario by Monte Carlo.

    Draws ``batches`` batches of ``batch_size`` points, each batch split
    50/50 between the classes, scores them with :func:`gt_score`, then sets
    the threshold at the (1 - target_fpr) healthy quantile.  Batches are
    independent given their derived seeds; the score pools are concatenated
    and the quantile/AUCROC computed once at the end, so aggregation does
    not depend on batch order.
    """
    if batches < 1 or batch_size < 2:
        raise ValueError("need batches >= 1 and batch_size >= 2")
    if not 0.0 < target_fpr < 1.0:
        raise ValueError("target_fpr must lie strictly between 0 and 1")

    n_h = batch_size // 2
    n_f = batch_size - n_h
    healthy_scores = np.empty(batches * n_h)
    faulty_scores = np.empty(batches * n_f)
    for b in range(batches):
        rng = stream("oracle.batch", seed, b)
        xh = dist.healthy.sample(n_h, rng)
        xf = dist.faulty.sample(n_f, rng)
        healthy_scores[b * n_h : (b + 1) * n_h] = gt_score(dist, xh)
        faulty_scores[b * n_f : (b + 1) * n_f] = gt_score(dist, xf)

    scores = ScoreSet(healthy=healthy_scores, faulty=faulty_scores)
    rep = threshold_report(scores, target_fpr)
    return GroundTruthMetrics(
        fpr=rep.achieved_fpr,
        fnr=rep.achieved_fnr,
        aucroc=aucroc(scores),
        n_points=batches * batch_size,
        target_fpr=float(target_fpr),
    )
