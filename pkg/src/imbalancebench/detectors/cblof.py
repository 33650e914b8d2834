"""Cluster-based local outlier factor with seeded k-means++.

k-means details are pinned for determinism: k-means++ D^2 seeding, 10
restarts, 300 iteration cap, 1e-4 relative inertia tolerance, best restart
by inertia.  A restart that empties a cluster is abandoned; if every
restart cascades into an empty cluster the fit fails.

Cluster split follows the usual large/small recipe (alpha = 0.9, beta = 5):
clusters sorted by size, the boundary placed at the first index where the
cumulative size reaches alpha*n and the size ratio jumps by beta (falling
back to whichever rule fires alone).  The score is the Euclidean distance
to the nearest large-cluster centroid, unweighted by cluster size.
"""

from __future__ import annotations

import numpy as np

from .._rng import stream
from .base import FitError

__all__ = ["kmeans", "fit_cblof", "CBLOF_KEYS"]

CBLOF_KEYS = {"n_clusters", "alpha", "beta", "random_state", "contamination"}


class EmptyClusterError(RuntimeError):
    pass


def _sq_dists(A, B):
    sq = (
        np.sum(A * A, axis=1)[:, None]
        + np.sum(B * B, axis=1)[None, :]
        - 2.0 * (A @ B.T)
    )
    np.maximum(sq, 0.0, out=sq)
    return sq


def _kmeanspp_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    closest = _sq_dists(X, centers[:1])[:, 0]
    for j in range(1, k):
        total = closest.sum()
        if total <= 0.0:
            idx = int(rng.integers(n))
        else:
            r = rng.random() * total
            idx = int(min(np.searchsorted(np.cumsum(closest), r, side="right"), n - 1))
        centers[j] = X[idx]
        np.minimum(closest, _sq_dists(X, centers[j : j + 1])[:, 0], out=closest)
    return centers


def _lloyd(X, centers, max_iter, rel_tol):
    prev_inertia = np.inf
    for _ in range(max_iter):
        sq = _sq_dists(X, centers)
        labels = np.argmin(sq, axis=1)
        inertia = float(sq[np.arange(X.shape[0]), labels].sum())
        counts = np.bincount(labels, minlength=centers.shape[0])
        if np.any(counts == 0):
            raise EmptyClusterError
        new_centers = np.zeros_like(centers)
        np.add.at(new_centers, labels, X)
        new_centers /= counts[:, None]
        if prev_inertia - inertia <= rel_tol * max(prev_inertia, 1e-300):
            return new_centers, labels, inertia
        centers = new_centers
        prev_inertia = inertia
    sq = _sq_dists(X, centers)
    labels = np.argmin(sq, axis=1)
    return centers, labels, float(sq[np.arange(X.shape[0]), labels].sum())


def kmeans(
    X: np.ndarray,
    k: int,
    seed_tokens: tuple = ("kmeans", 0),
    n_init: int = 10,
    max_iter: int = 300,
    rel_tol: float = 1e-4,
):
    """Best-of-n_init Lloyd clustering; returns (centers, labels, inertia).

    Raises EmptyClusterError if every restart produced an empty cluster.
    """
    X = np.asarray(X, dtype=np.float64)
    if k < 1 or k > X.shape[0]:
        raise EmptyClusterError
    best = None
    for restart in range(n_init):
        rng = stream(*seed_tokens, restart)
        try:
            result = _lloyd(X, _kmeanspp_init(X, k, rng), max_iter, rel_tol)
        except EmptyClusterError:
            continue
        if best is None or result[2] < best[2]:
            best = result
    if best is None:
        raise EmptyClusterError
    return best


def _split_clusters(sizes_desc: np.ndarray, n: int, alpha: float, beta: float) -> int:
    """Index of the first small cluster in the size-sorted order."""
    alpha_hits, beta_hits = [], []
    running = 0
    for i in range(1, sizes_desc.shape[0]):
        running += int(sizes_desc[i - 1])
        if running >= alpha * n:
            alpha_hits.append(i)
        if sizes_desc[i] > 0 and sizes_desc[i - 1] / sizes_desc[i] >= beta:
            beta_hits.append(i)
    both = sorted(set(alpha_hits) & set(beta_hits))
    if both:
        return both[0]
    if alpha_hits:
        return alpha_hits[0]
    if beta_hits:
        return beta_hits[0]
    raise EmptyClusterError


class _CblofScorer:
    def __init__(self, large_centers: np.ndarray):
        self.large_centers = large_centers

    def score(self, X: np.ndarray) -> np.ndarray:
        return np.sqrt(np.min(_sq_dists(X, self.large_centers), axis=1))


def fit_cblof(X: np.ndarray, y: np.ndarray, hp: dict) -> _CblofScorer:
    k = int(hp.get("n_clusters", 8))
    alpha = float(hp.get("alpha", 0.9))
    beta = float(hp.get("beta", 5.0))
    seed = hp.get("random_state")
    tokens = ("cblof.kmeans", -1 if seed is None else int(seed), k)
    if k < 2:
        raise FitError("cblof", hp, "n_clusters must be >= 2 for a large/small split")
    if k > X.shape[0]:
        raise FitError("cblof", hp, f"n_clusters={k} exceeds training size {X.shape[0]}")
    try:
        centers, labels, _ = kmeans(X, k, seed_tokens=tokens)
        sizes = np.bincount(labels, minlength=k)
        order = np.argsort(-sizes, kind="stable")
        boundary = _split_clusters(sizes[order], X.shape[0], alpha, beta)
    except EmptyClusterError:
        raise FitError("cblof", hp, "k-means empty-cluster cascade or no large/small split")
    return _CblofScorer(centers[order[:boundary]])
