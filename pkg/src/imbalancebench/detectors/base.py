"""Shared detector machinery: spec, standardizer, fitted-model wrapper.

Every detector is a (fit, score) pair behind one interface.  Scores are
oriented so that higher always means more anomalous; any algorithm whose
native output points the other way is negated internally.  Fitting failures
that the tuning layer is expected to absorb (singular kernels, empty
clusters, k larger than the training set, non-convergent solvers) surface
as :class:`FitError` carrying the detector and hyperparameter identity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "FitError",
    "DetectorSpec",
    "Standardizer",
    "FittedDetector",
    "resolve_hp",
]

US, SS, FS = "US", "SS", "FS"
CATEGORIES = (US, SS, FS)

# Hyperparameters that may be given as a fraction of the training size;
# fractional values in (0, 1) resolve to ceil(fraction * N).
_FRACTION_KEYS = {"n_neighbors"}


class FitError(RuntimeError):
    """A detector failed to fit or produce finite scores."""

    def __init__(self, detector: str, hp: dict, reason: str):
        self.detector = detector
        self.hp = dict(hp)
        self.reason = reason
        super().__init__(f"{detector} failed with hp={hp!r}: {reason}")


@dataclass(frozen=True)
class DetectorSpec:
    """Detector identity, category and hyperparameter grid.

    ``grid`` is the full list of tuned assignments in a fixed enumeration
    order (ties during tuning break toward earlier entries).  ``fixed``
    holds set-but-untuned parameters; entries the scores-only pipeline has
    no use for (``contamination``, ``break_ties``) are accepted and inert.
    """

    name: str
    category: str
    grid: tuple = (({}),)
    fixed: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise ValueError(f"category must be one of {CATEGORIES}, got {self.category!r}")
        grid = tuple(dict(hp) for hp in self.grid)
        if len(grid) == 0:
            raise ValueError("grid must contain at least one assignment (possibly empty)")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "fixed", dict(self.fixed))


def resolve_hp(hp: dict, n_total: int) -> dict:
    """Make a grid assignment concrete for a training set of n_total samples.

    Fractional neighbor counts resolve as ceil(fraction * n_total); numpy
    scalars are normalized to plain Python types so resolved assignments
    serialize cleanly.
    """
    out = {}
    for key, value in hp.items():
        if key in _FRACTION_KEYS and isinstance(value, (float, np.floating)) and 0 < value < 1:
            out[key] = int(math.ceil(value * n_total))
        elif isinstance(value, (bool, np.bool_)):
            out[key] = bool(value)
        elif isinstance(value, (int, np.integer)):
            out[key] = int(value)
        elif isinstance(value, (float, np.floating)):
            out[key] = float(value)
        else:
            out[key] = value
    return out


@dataclass(frozen=True)
class Standardizer:
    """Per-feature shift/scale to zero mean and unit variance.

    Fitted on training data only.  Features with (numerically) zero spread
    keep a unit scale so they pass through centered instead of exploding.
    """

    means: np.ndarray
    stds: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardizer":
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] == 0:
            raise ValueError("standardizer needs a nonempty (n, d) matrix")
        means = X.mean(axis=0)
        stds = X.std(axis=0)
        floor = 1e-12 * np.maximum(1.0, np.abs(means))
        stds = np.where(stds <= floor, 1.0, stds)
        return cls(means=means, stds=stds)

    @property
    def d(self) -> int:
        return self.means.shape[0]

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.d:
            raise ValueError(f"expected (n, {self.d}) points, got shape {X.shape}")
        return (X - self.means) / self.stds

    def inverse_transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        return X * self.stds + self.means


@dataclass(frozen=True)
class FittedDetector:
    """A trained detector: spec reference, chosen hp, scaler and model state."""

    spec: DetectorSpec
    hp: dict
    standardizer: Standardizer
    scorer: object  # opaque model state exposing .score(X_standardized)

    @property
    def d(self) -> int:
        return self.standardizer.d

    def score(self, points: np.ndarray) -> np.ndarray:
        """Scores for an (n, d) matrix; one finite real per point, higher = more anomalous."""
        points = np.asarray(points, dtype=np.float64)
        if points.ndim != 2:
            raise ValueError(f"points must be an (n, d) matrix, got shape {points.shape}")
        if points.shape[0] == 0:
            return np.empty(0)
        values = np.asarray(self.scorer.score(self.standardizer.transform(points)), dtype=np.float64)
        if not np.all(np.isfinite(values)):
            raise FitError(self.spec.name, self.hp, "non-finite scores produced")
        return values
