"""Boosted stacking on unsupervised detector scores.

The training representation concatenates the standardized input features
with the score outputs of a fixed bank of unsupervised detectors fitted on
the same points, and a gradient-boosted classifier learns labels on top.
The bank is pinned (and versioned by this module):

    knn / lof  at k = 3, ceil(0.01 n), ceil(0.05 n)
    iforest    100 trees, auto subsample
    cblof      8 clusters
    ocsvm      rbf kernel, scale gamma, nu = 0.5

Bank scores are standardized column-wise before concatenation.  The
detector's random_state seeds the stochastic bank members (iforest, the
cblof k-means); the boosting stage itself is deterministic.
"""

from __future__ import annotations

import math

import numpy as np

from .base import FitError, Standardizer
from .boosting import GradientBoostedTrees
from .cblof import fit_cblof
from .iforest import fit_iforest
from .neighbors import _sq_dists, fit_knn, fit_lof
from .svm import fit_ocsvm

__all__ = ["fit_xgbod", "bank_specs", "XGBOD_KEYS"]

XGBOD_KEYS = {"random_state"}


def bank_specs(n: int, random_state: int) -> list[tuple]:
    """(fitter, hp) pairs of the unsupervised bank for an n-point training set."""
    ks = sorted({3, math.ceil(0.01 * n), math.ceil(0.05 * n)})
    bank: list[tuple] = []
    for k in ks:
        bank.append((fit_knn, {"n_neighbors": k}))
    for k in ks:
        bank.append((fit_lof, {"n_neighbors": k}))
    bank.append(
        (fit_iforest, {"n_estimators": 100, "max_samples": "auto", "random_state": random_state})
    )
    bank.append((fit_cblof, {"n_clusters": 8, "random_state": random_state}))
    bank.append((fit_ocsvm, {"kernel": "rbf", "gamma": "scale", "nu": 0.5}))
    return bank


class _XgbodScorer:
    def __init__(self, bank, train, score_standardizer, booster):
        self.bank = bank
        self.train = train  # shared by every neighbor bank member
        self.score_standardizer = score_standardizer
        self.booster = booster

    def _bank_scores(self, X: np.ndarray) -> np.ndarray:
        """Bank score columns, sharing one distance block per query chunk."""
        cols = np.empty((X.shape[0], len(self.bank)))
        step = max(1, min(X.shape[0], (1 << 24) // max(1, self.train.shape[0])))
        for start in range(0, X.shape[0], step):
            chunk = X[start : start + step]
            sq_block = None
            for m, scorer in enumerate(self.bank):
                if hasattr(scorer, "score_block"):
                    if sq_block is None:
                        sq_block = _sq_dists(chunk, self.train)
                    cols[start : start + step, m] = scorer.score_block(sq_block)
                else:
                    cols[start : start + step, m] = scorer.score(chunk)
        return cols

    def _augment(self, X: np.ndarray) -> np.ndarray:
        return np.hstack([X, self.score_standardizer.transform(self._bank_scores(X))])

    def score(self, X: np.ndarray) -> np.ndarray:
        return self.booster.predict_margin(self._augment(X))


def fit_xgbod(X: np.ndarray, y: np.ndarray, hp: dict) -> _XgbodScorer:
    if len(np.unique(np.asarray(y))) < 2:
        raise FitError("xgbod", hp, "both classes required")
    random_state = int(hp.get("random_state", 1))
    X = np.ascontiguousarray(X, dtype=np.float64)
    bank = []
    for fitter, bank_hp in bank_specs(X.shape[0], random_state):
        try:
            bank.append(fitter(X, y, bank_hp))
        except FitError as exc:
            raise FitError("xgbod", hp, f"bank member failed: {exc}")
    scorer = _XgbodScorer(bank, X, None, None)
    train_scores = scorer._bank_scores(X)
    if not np.all(np.isfinite(train_scores)):
        raise FitError("xgbod", hp, "bank produced non-finite training scores")
    score_standardizer = Standardizer.fit(train_scores)
    augmented = np.hstack([X, score_standardizer.transform(train_scores)])
    booster = GradientBoostedTrees().fit(augmented, np.asarray(y, dtype=np.float64))
    return _XgbodScorer(bank, X, score_standardizer, booster)
