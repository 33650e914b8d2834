"""Stratified five-fold cross-validation and validation-AUCROC grid search.

Folds stratify by class: faulty examples are dealt as evenly as possible
(per-fold counts differ by at most one) and total fold sizes also differ by
at most one, which requires at least as many faulty examples as folds.
Hyperparameters are chosen by the highest mean held-out AUCROC; grid points
whose fit errors out anywhere are excluded, and a detector with no valid
grid point left fails the whole run.  Cross-validation runs even for
detectors with nothing to tune so every detector gets validation metrics.

One-class detectors drop anomalies from their four training folds inside
``fit``; the held-out fold keeps both classes so validation metrics are
label-aware.  Per-fold FPR/FNR come from a threshold fitted on that fold's
held-out healthy scores, and the per-fold rates (not thresholds) are
averaged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._rng import stream
from .detectors import DetectorSpec, FitError, fit, resolve_hp
from .metrics import ScoreSet, aucroc, threshold_for_fpr, fnr_at_threshold, fpr_at_threshold
from .synth import LabeledDataset

__all__ = [
    "InsufficientAnomaliesError",
    "DetectorFailedError",
    "FoldPlan",
    "ValidationResult",
    "plan_folds",
    "grid_search",
]


class InsufficientAnomaliesError(ValueError):
    """Fewer faulty training examples than folds."""


class DetectorFailedError(RuntimeError):
    """Every grid point of a detector was excluded."""

    def __init__(self, detector: str, reasons: list[str]):
        self.detector = detector
        self.reasons = reasons
        super().__init__(f"{detector}: all {len(reasons)} grid points failed")


@dataclass(frozen=True)
class FoldPlan:
    fold_of: np.ndarray  # per-example fold index in {0..k-1}

    def __post_init__(self):
        arr = np.ascontiguousarray(np.asarray(self.fold_of, dtype=np.int8))
        arr.flags.writeable = False
        object.__setattr__(self, "fold_of", arr)

    @property
    def k(self) -> int:
        return int(self.fold_of.max()) + 1


@dataclass(frozen=True)
class ValidationResult:
    detector: str
    chosen_hp: dict
    validation_aucroc: float
    validation_fpr: float
    validation_fnr: float
    validation_threshold: float  # mean of per-fold thresholds (for threshold transfer)
    excluded_hp_count: int


def plan_folds(train: LabeledDataset, k: int = 5, seed: int = 0) -> FoldPlan:
    """Stratified fold assignment; deterministic per seed."""
    n = len(train)
    labels = np.asarray(train.labels)
    faulty_idx = np.flatnonzero(labels == 1)
    healthy_idx = np.flatnonzero(labels == 0)
    if faulty_idx.size < k:
        raise InsufficientAnomaliesError(
            f"need at least {k} faulty examples for {k}-fold stratification, got {faulty_idx.size}"
        )

    # quota per fold: totals and faulty counts each differ by at most 1
    totals = np.full(k, n // k)
    totals[: n % k] += 1
    faulty_quota = np.full(k, faulty_idx.size // k)
    faulty_quota[: faulty_idx.size % k] += 1
    # both remainders land on the earliest folds, so the quota never goes negative
    healthy_quota = totals - faulty_quota

    rng = stream("folds", seed, n, int(faulty_idx.size), k)
    fold_of = np.empty(n, dtype=np.int8)
    fold_of[faulty_idx[rng.permutation(faulty_idx.size)]] = np.repeat(
        np.arange(k, dtype=np.int8), faulty_quota
    )
    fold_of[healthy_idx[rng.permutation(healthy_idx.size)]] = np.repeat(
        np.arange(k, dtype=np.int8), healthy_quota
    )
    return FoldPlan(fold_of)


def _subset(train: LabeledDataset, mask: np.ndarray) -> LabeledDataset:
    return LabeledDataset(train.points[mask], np.asarray(train.labels)[mask], train.seed)


def grid_search(
    spec: DetectorSpec,
    train: LabeledDataset,
    plan: FoldPlan,
    target_fpr: float,
) -> ValidationResult:
    """Evaluate the full grid by k-fold CV and pick the best assignment.

    Ties on mean validation AUCROC break toward the earlier grid entry.
    """
    fold_of = np.asarray(plan.fold_of)
    if fold_of.shape[0] != len(train):
        raise ValueError("fold plan does not match training set")
    k = plan.k
    labels = np.asarray(train.labels)
    n_grid = len(spec.grid)

    # folds outermost so derived-matrix caches see one training subset at a
    # time; results are identical to iterating grid-first
    metrics = np.empty((n_grid, k, 4))  # auc, fpr, fnr, threshold
    failed: list[str | None] = [None] * n_grid
    for f in range(k):
        held = fold_of == f
        fit_set = _subset(train, ~held)
        held_points = train.points[held]
        held_labels = labels[held]
        for grid_index, raw_hp in enumerate(spec.grid):
            if failed[grid_index] is not None:
                continue
            try:
                model = fit(spec, raw_hp, fit_set)
                scores = model.score(held_points)
            except FitError as exc:
                failed[grid_index] = str(exc)
                continue
            ss = ScoreSet(healthy=scores[held_labels == 0], faulty=scores[held_labels == 1])
            thr = threshold_for_fpr(ss.healthy, target_fpr)
            metrics[grid_index, f] = (
                aucroc(ss),
                fpr_at_threshold(ss.healthy, thr),
                fnr_at_threshold(ss.faulty, thr),
                thr,
            )

    best = None  # (mean_auc, hp, fpr, fnr, thr)
    for grid_index, raw_hp in enumerate(spec.grid):
        if failed[grid_index] is not None:
            continue
        mean_auc = float(metrics[grid_index, :, 0].mean())
        if best is None or mean_auc > best[0]:
            best = (
                mean_auc,
                resolve_hp({**spec.fixed, **raw_hp}, len(train)),
                float(metrics[grid_index, :, 1].mean()),
                float(metrics[grid_index, :, 2].mean()),
                float(metrics[grid_index, :, 3].mean()),
            )
    excluded = sum(1 for r in failed if r is not None)
    if best is None:
        raise DetectorFailedError(spec.name, [r for r in failed if r is not None])
    mean_auc, hp, mean_fpr, mean_fnr, mean_thr = best
    return ValidationResult(
        detector=spec.name,
        chosen_hp=hp,
        validation_aucroc=mean_auc,
        validation_fpr=mean_fpr,
        validation_fnr=mean_fnr,
        validation_threshold=mean_thr,
        excluded_hp_count=excluded,
    )
