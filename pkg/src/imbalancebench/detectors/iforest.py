"""Isolation forest.

Trees are complete binary heaps (root = 1) stored as per-forest arrays.
Each node splits on a random feature at a threshold drawn uniformly
between the node's min and max on that feature; a node becomes a leaf when
it holds <= 1 sample, has no spread on the drawn feature, or sits at the
depth cap ceil(log2(sample_size)).

All randomness is drawn up front from the detector's random_state -- one
subsample per tree plus a (feature, uniform) pair for every node slot,
whether or not the slot activates -- so the stream a seed produces never
depends on the data.  The compiled builder then partitions each tree's
subsample in place.

The anomaly score is 2**(-E[h]/c(psi)) with E[h] the mean path length over
trees (depth reached plus c(leaf occupancy)) and c(n) = 2*H(n-1) - 2(n-1)/n
the expected path length of an unsuccessful BST search; harmonic numbers
are exact, so c(2) = 1 holds exactly.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .._rng import stream
from .base import FitError

__all__ = ["fit_iforest", "expected_path_length", "IFOREST_KEYS"]

IFOREST_KEYS = {"n_estimators", "max_samples", "random_state", "contamination"}


def expected_path_length(sizes, max_size: int | None = None) -> np.ndarray:
    """c(n) with exact harmonic numbers; c(n) = 0 for n <= 1."""
    sizes = np.asarray(sizes)
    top = int(max_size if max_size is not None else sizes.max() if sizes.size else 1)
    harm = np.concatenate([[0.0], np.cumsum(1.0 / np.arange(1, max(top, 2)))])
    out = np.zeros(sizes.shape)
    big = sizes >= 2
    s = sizes[big].astype(np.int64)
    out[big] = 2.0 * harm[s - 1] - 2.0 * (s - 1) / s
    return out


def _resolve_psi(max_samples, n: int) -> int:
    if isinstance(max_samples, str):
        if max_samples != "auto":
            raise ValueError(f"unknown max_samples {max_samples!r}")
        return min(256, n)
    if isinstance(max_samples, (float, np.floating)) and not isinstance(max_samples, (int, np.integer)):
        if not 0.0 < max_samples <= 1.0:
            raise ValueError(f"fractional max_samples must lie in (0, 1], got {max_samples}")
        return max(1, min(n, int(max_samples * n)))
    v = int(max_samples)
    if v < 1:
        raise ValueError(f"max_samples must be >= 1, got {v}")
    return min(n, v)


@njit(cache=True)
def _build(X, sub, feats, us, depth_of, hmax, feature, threshold, leaf_size):
    n_trees, psi = sub.shape
    idx = np.empty(psi, np.int64)
    stack_node = np.empty(4 * psi + 8, np.int64)
    stack_lo = np.empty(4 * psi + 8, np.int64)
    stack_hi = np.empty(4 * psi + 8, np.int64)
    for tree in range(n_trees):
        for k in range(psi):
            idx[k] = sub[tree, k]
        sp = 0
        stack_node[0] = 1
        stack_lo[0] = 0
        stack_hi[0] = psi
        sp = 1
        while sp > 0:
            sp -= 1
            node = stack_node[sp]
            lo = stack_lo[sp]
            hi = stack_hi[sp]
            count = hi - lo
            if count <= 1 or depth_of[node] >= hmax:
                leaf_size[tree, node] = count
                continue
            f = feats[tree, node]
            mn = X[idx[lo], f]
            mx = mn
            for k in range(lo + 1, hi):
                v = X[idx[k], f]
                if v < mn:
                    mn = v
                elif v > mx:
                    mx = v
            if not mx > mn:
                leaf_size[tree, node] = count
                continue
            thr = mn + us[tree, node] * (mx - mn)
            feature[tree, node] = f
            threshold[tree, node] = thr
            i = lo
            for k in range(lo, hi):
                if X[idx[k], f] < thr:
                    tmp = idx[i]
                    idx[i] = idx[k]
                    idx[k] = tmp
                    i += 1
            stack_node[sp] = 2 * node
            stack_lo[sp] = lo
            stack_hi[sp] = i
            sp += 1
            stack_node[sp] = 2 * node + 1
            stack_lo[sp] = i
            stack_hi[sp] = hi
            sp += 1


@njit(cache=True)
def _mean_path_lengths(X, feature, threshold, leaf_size, c_of_size):
    m = X.shape[0]
    n_trees = feature.shape[0]
    out = np.empty(m)
    for p in range(m):
        acc = 0.0
        for tree in range(n_trees):
            node = 1
            depth = 0
            while feature[tree, node] >= 0:
                f = feature[tree, node]
                node = 2 * node + (0 if X[p, f] < threshold[tree, node] else 1)
                depth += 1
            acc += depth + c_of_size[leaf_size[tree, node]]
        out[p] = acc / n_trees
    return out


class _IsolationForestScorer:
    def __init__(self, X: np.ndarray, n_trees: int, psi: int, rng: np.random.Generator):
        n, d = X.shape
        self.psi = psi
        hmax = int(np.ceil(np.log2(psi))) if psi >= 2 else 0
        n_nodes = 1 << (hmax + 1)
        depth_of = np.zeros(n_nodes, dtype=np.int64)
        for lvl in range(1, hmax + 1):
            depth_of[1 << lvl : 1 << (lvl + 1)] = lvl
        self.feature = np.full((n_trees, n_nodes), -1, dtype=np.int32)
        self.threshold = np.zeros((n_trees, n_nodes))
        self.leaf_size = np.zeros((n_trees, n_nodes), dtype=np.int64)
        self._c_of_size = expected_path_length(np.arange(psi + 1), max_size=psi)
        self._c_psi = float(expected_path_length(np.array([psi]), max_size=psi)[0])

        # rank-of-uniform subsampling = uniform subset without replacement
        sub = np.argpartition(rng.random((n_trees, n)), min(psi, n - 1), axis=1)[:, :psi]
        feats = rng.integers(0, d, size=(n_trees, n_nodes))
        us = rng.random((n_trees, n_nodes))
        if psi >= 2:
            _build(
                X,
                np.ascontiguousarray(sub),
                feats,
                us,
                depth_of,
                hmax,
                self.feature,
                self.threshold,
                self.leaf_size,
            )
        else:
            self.leaf_size[:, 1] = psi

    def score(self, X: np.ndarray) -> np.ndarray:
        if self.psi < 2:
            return np.full(X.shape[0], 0.5)
        paths = _mean_path_lengths(
            np.ascontiguousarray(X), self.feature, self.threshold, self.leaf_size, self._c_of_size
        )
        return 2.0 ** (-paths / self._c_psi)


def fit_iforest(X: np.ndarray, y: np.ndarray, hp: dict) -> _IsolationForestScorer:
    n_trees = int(hp.get("n_estimators", 100))
    if n_trees < 1:
        raise FitError("iforest", hp, "n_estimators must be >= 1")
    if X.shape[0] < 1:
        raise FitError("iforest", hp, "empty training set")
    try:
        psi = _resolve_psi(hp.get("max_samples", "auto"), X.shape[0])
    except ValueError as exc:
        raise FitError("iforest", hp, str(exc))
    rng = stream("iforest", int(hp.get("random_state", 0)), n_trees, psi)
    return _IsolationForestScorer(np.ascontiguousarray(X), n_trees, psi, rng)
