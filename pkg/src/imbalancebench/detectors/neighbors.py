"""Distance-based detectors: k-th-nearest-neighbor distance and LOF.

Both use exact brute-force neighbor search, chunked so no distance block
exceeds a fixed element budget.  Exactness matters here: results must be
independent of any spatial-index implementation detail.
"""

from __future__ import annotations

import numpy as np

from ._cache import MatrixCache, array_key
from .base import FitError

__all__ = ["fit_knn", "fit_lof", "KNN_KEYS", "LOF_KEYS"]

KNN_KEYS = {"n_neighbors"}
LOF_KEYS = {"n_neighbors"}

_CHUNK_ELEMS = 2**24  # max elements per distance block (~128 MB float64)
_DIST_FLOOR = 1e-12  # reachability floor; duplicates would otherwise divide by zero

_dist_cache = MatrixCache()


def _sq_dists(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    sq = (
        np.sum(A * A, axis=1)[:, None]
        + np.sum(B * B, axis=1)[None, :]
        - 2.0 * (A @ B.T)
    )
    np.maximum(sq, 0.0, out=sq)
    return sq


def _sq_dists_cached(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Full (read-only) squared-distance matrix, cached by content."""
    return _dist_cache.get_or_compute(
        array_key(b"sqd", A, B), A.shape[0] * B.shape[0], lambda: _sq_dists(A, B)
    )


def _chunk_rows(n_rows: int, n_cols: int) -> int:
    return max(1, min(n_rows, _CHUNK_ELEMS // max(1, n_cols)))


class _KthDistanceScorer:
    """Score = Euclidean distance to the k-th nearest training point."""

    def __init__(self, train: np.ndarray, k: int):
        self.train = train
        self.k = k

    def score_block(self, sq_block: np.ndarray) -> np.ndarray:
        """Scores from a precomputed query-to-train squared-distance block."""
        return np.sqrt(np.partition(sq_block, self.k - 1, axis=1)[:, self.k - 1])

    def score(self, X: np.ndarray) -> np.ndarray:
        out = np.empty(X.shape[0])
        step = _chunk_rows(X.shape[0], self.train.shape[0])
        if step >= X.shape[0]:
            return self.score_block(_sq_dists_cached(X, self.train))
        for start in range(0, X.shape[0], step):
            out[start : start + step] = self.score_block(_sq_dists(X[start : start + step], self.train))
        return out


def _neighbor_blocks(X: np.ndarray, train: np.ndarray, k: int, exclude_self: bool):
    """Yield (row_slice, neighbor_idx, neighbor_dist) blocks of k nearest training points."""
    step = _chunk_rows(X.shape[0], train.shape[0])
    for start in range(0, X.shape[0], step):
        stop = min(start + step, X.shape[0])
        cacheable = X.shape[0] * train.shape[0] <= _dist_cache.max_elements
        if start == 0 and stop == X.shape[0] and cacheable:
            block = _sq_dists_cached(X, train)
            if exclude_self:
                block = block.copy()
                np.fill_diagonal(block, np.inf)
        else:
            block = _sq_dists(X[start:stop], train)
            if exclude_self:
                rows = np.arange(start, stop)
                block[np.arange(stop - start), rows] = np.inf
        idx = np.argpartition(block, k - 1, axis=1)[:, :k]
        dist = np.sqrt(np.take_along_axis(block, idx, axis=1))
        yield slice(start, stop), idx, dist


class _LofScorer:
    """Local outlier factor against the fitted training set.

    Training-side k-distances and local reachability densities are
    precomputed (neighbors among the *other* training points); queries are
    scored novelty-style against the training set.
    """

    def __init__(self, train: np.ndarray, k: int):
        self.train = train
        self.k = k
        n = train.shape[0]
        kdist = np.empty(n)
        lrd = np.empty(n)
        nbr_idx = np.empty((n, k), dtype=np.int64)
        nbr_dist = np.empty((n, k))
        for rows, idx, dist in _neighbor_blocks(train, train, k, exclude_self=True):
            nbr_idx[rows] = idx
            nbr_dist[rows] = dist
            kdist[rows] = dist.max(axis=1)
        for start in range(0, n, 65536):
            stop = min(start + 65536, n)
            reach = np.maximum(kdist[nbr_idx[start:stop]], nbr_dist[start:stop])
            np.maximum(reach, _DIST_FLOOR, out=reach)
            lrd[start:stop] = self.k / reach.sum(axis=1)
        self.kdist = kdist
        self.lrd = lrd

    def score_block(self, sq_block: np.ndarray) -> np.ndarray:
        """Scores from a precomputed query-to-train squared-distance block."""
        idx = np.argpartition(sq_block, self.k - 1, axis=1)[:, : self.k]
        dist = np.sqrt(np.take_along_axis(sq_block, idx, axis=1))
        reach = np.maximum(self.kdist[idx], dist)
        np.maximum(reach, _DIST_FLOOR, out=reach)
        lrd_q = self.k / reach.sum(axis=1)
        return self.lrd[idx].mean(axis=1) / lrd_q

    def score(self, X: np.ndarray) -> np.ndarray:
        out = np.empty(X.shape[0])
        for rows, idx, dist in _neighbor_blocks(X, self.train, self.k, exclude_self=False):
            reach = np.maximum(self.kdist[idx], dist)
            np.maximum(reach, _DIST_FLOOR, out=reach)
            lrd_q = self.k / reach.sum(axis=1)
            out[rows] = self.lrd[idx].mean(axis=1) / lrd_q
        return out


def _check_k(name: str, hp: dict, n: int, max_k: int) -> int:
    k = int(hp.get("n_neighbors", 5))
    if k < 1:
        raise FitError(name, hp, f"n_neighbors must be >= 1, got {k}")
    if k > max_k:
        raise FitError(name, hp, f"n_neighbors={k} exceeds usable training size {max_k} (n={n})")
    return k


def fit_knn(X: np.ndarray, y: np.ndarray, hp: dict) -> _KthDistanceScorer:
    k = _check_k("knn", hp, X.shape[0], X.shape[0])
    return _KthDistanceScorer(X, k)


def fit_lof(X: np.ndarray, y: np.ndarray, hp: dict) -> _LofScorer:
    # each training point needs k neighbors among the others
    k = _check_k("lof", hp, X.shape[0], X.shape[0] - 1)
    return _LofScorer(X, k)
