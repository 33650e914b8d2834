"""Detector suite: registry, public fit/score entry points, default grids.

Eight detectors ship with the package, keyed by stable string identifiers:

    unsupervised (US):    knn, lof, cblof, iforest, ocsvm
    semi-supervised (SS): xgbod
    fully supervised (FS): svm, xgb

Unsupervised detectors are fitted "one-class": anomalous rows are removed
from their training data (labels still drive fold stratification and
validation metrics upstream).  SS/FS detectors see all rows with labels.
The feature standardizer is always fitted on the full training set.
"""

from __future__ import annotations

import itertools

import numpy as np

from ..synth import LabeledDataset
from .base import (
    CATEGORIES,
    FS,
    SS,
    US,
    DetectorSpec,
    FitError,
    FittedDetector,
    Standardizer,
    resolve_hp,
)
from .boosting import XGB_KEYS, fit_xgb
from .cblof import CBLOF_KEYS, fit_cblof
from .iforest import IFOREST_KEYS, fit_iforest
from .neighbors import KNN_KEYS, LOF_KEYS, fit_knn, fit_lof
from .svm import OCSVM_KEYS, SVC_KEYS, fit_ocsvm, fit_svc
from .xgbod import XGBOD_KEYS, fit_xgbod

__all__ = [
    "DetectorSpec",
    "FitError",
    "FittedDetector",
    "Standardizer",
    "fit",
    "resolve_hp",
    "register_detector",
    "detector_category",
    "detector_names",
    "default_suite",
    "grid_from_mapping",
]

# name -> (category, fitter, accepted hp keys; None = accept anything)
_REGISTRY: dict[str, tuple] = {}


def register_detector(name: str, category: str, fitter, keys=None) -> None:
    """Add a detector to the registry (also the extension point for tests)."""
    if category not in CATEGORIES:
        raise ValueError(f"category must be one of {CATEGORIES}")
    _REGISTRY[name] = (category, fitter, None if keys is None else frozenset(keys))


register_detector("knn", US, fit_knn, KNN_KEYS | {"contamination"})
register_detector("lof", US, fit_lof, LOF_KEYS | {"contamination"})
register_detector("cblof", US, fit_cblof, CBLOF_KEYS)
register_detector("iforest", US, fit_iforest, IFOREST_KEYS)
register_detector("ocsvm", US, fit_ocsvm, OCSVM_KEYS)
register_detector("xgbod", SS, fit_xgbod, XGBOD_KEYS)
register_detector("svm", FS, fit_svc, SVC_KEYS)
register_detector("xgb", FS, fit_xgb, XGB_KEYS)


def detector_names() -> list[str]:
    return list(_REGISTRY)


def detector_category(name: str) -> str:
    try:
        return _REGISTRY[name][0]
    except KeyError:
        raise KeyError(f"unknown detector {name!r}; known: {sorted(_REGISTRY)}")


def fit(spec: DetectorSpec, hp: dict, train: LabeledDataset) -> FittedDetector:
    """Fit one detector at one hyperparameter assignment.

    The standardizer is fitted on the full training points; unsupervised
    detectors then train on the healthy subset only.  Fractional
    hyperparameters resolve against the full training size.  Expected
    failure modes raise :class:`FitError` for the tuning layer to exclude.
    """
    if spec.name not in _REGISTRY:
        raise KeyError(f"unknown detector {spec.name!r}; known: {sorted(_REGISTRY)}")
    category, fitter, keys = _REGISTRY[spec.name]
    if category != spec.category:
        raise ValueError(f"{spec.name} is registered as {category}, spec says {spec.category}")
    if len(train) == 0:
        raise FitError(spec.name, hp, "empty training set")

    merged = {**spec.fixed, **hp}
    if keys is not None:
        unknown = set(merged) - keys
        if unknown:
            raise ValueError(f"{spec.name} does not accept hyperparameters {sorted(unknown)}")
    resolved = resolve_hp(merged, len(train))

    standardizer = Standardizer.fit(train.points)
    X = standardizer.transform(train.points)
    y = np.asarray(train.labels)
    if category == US:
        X = X[y == 0]
        y = y[y == 0]
        if X.shape[0] == 0:
            raise FitError(spec.name, resolved, "no healthy training examples")
    else:
        if len(np.unique(y)) < 2:
            raise FitError(spec.name, resolved, "need at least one example per class")

    scorer = fitter(X, y, resolved)
    return FittedDetector(spec=spec, hp=resolved, standardizer=standardizer, scorer=scorer)


def grid_from_mapping(mapping: dict) -> tuple:
    """Cross product of per-parameter value lists, in declared key order."""
    if not mapping:
        return ({},)
    names = list(mapping)
    combos = itertools.product(*(mapping[k] for k in names))
    return tuple(dict(zip(names, values)) for values in combos)


_NEIGHBOR_GRID = [3, 5, 7, 0.001, 0.01, 0.02, 0.03, 0.04, 0.06, 0.08, 0.10, 0.12, 0.15]


def default_suite(names=None) -> list[DetectorSpec]:
    """The shipped suite with its tuning grids.

    Fractions in the neighbor grids resolve as ceil(fraction * N) with N
    the full training-set size.  ``contamination`` and ``break_ties``
    appear for interface compatibility and are inert: labels come from the
    quantile thresholding in :mod:`imbalancebench.metrics` alone.
    """
    specs = {
        "knn": DetectorSpec(
            "knn",
            US,
            grid_from_mapping({"n_neighbors": _NEIGHBOR_GRID}),
            fixed={"contamination": 0.01},
        ),
        "lof": DetectorSpec(
            "lof",
            US,
            grid_from_mapping({"n_neighbors": _NEIGHBOR_GRID}),
            fixed={"contamination": 0.01},
        ),
        "cblof": DetectorSpec(
            "cblof", US, grid_from_mapping({"n_clusters": [4, 6, 8, 10, 12]})
        ),
        "iforest": DetectorSpec(
            "iforest",
            US,
            grid_from_mapping(
                {
                    "random_state": [0, 1, 2, 3, 4],
                    "n_estimators": [50, 75, 100],
                    "max_samples": ["auto", 0.5, 0.7, 0.8, 0.9],
                }
            ),
            fixed={"contamination": 0.01},
        ),
        "ocsvm": DetectorSpec(
            "ocsvm",
            US,
            grid_from_mapping(
                {
                    "kernel": ["sigmoid", "rbf", "linear"],
                    "gamma": ["auto", "scale"],
                    "nu": [0.3, 0.5, 0.7, 0.9],
                }
            ),
            fixed={"contamination": 0.01},
        ),
        "xgbod": DetectorSpec(
            "xgbod", SS, grid_from_mapping({"random_state": [1, 2, 3, 4, 5]})
        ),
        "svm": DetectorSpec(
            "svm",
            FS,
            grid_from_mapping(
                {
                    "kernel": ["sigmoid", "rbf", "linear"],
                    "gamma": ["auto", "scale"],
                    "c": [0.1, 0.3, 0.5, 0.7, 1.0, 1.2, 1.5, 1.7, 2.0],
                }
            ),
            fixed={"class_weight": "balanced", "break_ties": True},
        ),
        "xgb": DetectorSpec("xgb", FS, ({},)),
    }
    if names is None:
        return list(specs.values())
    return [specs[n] for n in names]
