"""Synthetic two-class "TvS" distributions with exact densities.

The healthy class is a three-mode isotropic Gaussian mixture with modes at
the origin and at +/- mu_a along the all-ones diagonal (mu_a = sqrt(mu^2/d),
so the modes sit at Euclidean distance mu from the origin).  The faulty
class approximates a hypersphere shell of radius mu/2: a mixture of
``n_clusters`` isotropic Gaussians whose centers are drawn once from a
dedicated placement seed and normalized onto the shell.  Because both class
densities are known exactly, a Bayes-optimal reference detector exists for
every scenario (see :mod:`imbalancebench.oracle`).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._rng import stream

__all__ = [
    "InvalidScenarioError",
    "ScenarioSpec",
    "IsotropicGaussianMixture",
    "TvSDistribution",
    "LabeledDataset",
    "build_tvs",
    "sample",
]

HEALTHY, FAULTY = 0, 1


class InvalidScenarioError(ValueError):
    """Scenario parameters outside the allowed TvS parameter region."""


@dataclass(frozen=True)
class ScenarioSpec:
    """Parameters of one TvS scenario.

    ``placement_seed`` fixes the faulty cluster centers, making the whole
    distribution (and therefore its ground truth) a constant of the spec:
    two builds from equal specs are identical bit for bit.
    """

    d: int
    mu: float
    sigma2_a: float
    sigma2_b: float
    n_clusters: int = 200
    placement_seed: int = 777

    def __post_init__(self):
        if int(self.d) < 1:
            raise InvalidScenarioError(f"d must be a positive integer, got {self.d}")
        if not self.mu > 0:
            raise InvalidScenarioError(f"mu must be > 0, got {self.mu}")
        if not self.sigma2_a > 0.01:
            raise InvalidScenarioError(f"sigma2_a must be > 0.01, got {self.sigma2_a}")
        if not self.sigma2_b > 0.01:
            raise InvalidScenarioError(f"sigma2_b must be > 0.01, got {self.sigma2_b}")
        if int(self.n_clusters) < 1:
            raise InvalidScenarioError(f"n_clusters must be >= 1, got {self.n_clusters}")

    @property
    def mu_a(self) -> float:
        return float(np.sqrt(self.mu**2 / self.d))

    @property
    def r_b(self) -> float:
        return self.mu / 2.0

    def to_json_dict(self) -> dict:
        return {
            "d": int(self.d),
            "mu": float(self.mu),
            "sigma2_a": float(self.sigma2_a),
            "sigma2_b": float(self.sigma2_b),
            "n_clusters": int(self.n_clusters),
            "placement_seed": int(self.placement_seed),
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "ScenarioSpec":
        known = {"d", "mu", "sigma2_a", "sigma2_b", "n_clusters", "placement_seed"}
        unknown = set(obj) - known
        if unknown:
            raise InvalidScenarioError(f"unknown scenario fields: {sorted(unknown)}")
        missing = {"d", "mu", "sigma2_a", "sigma2_b"} - set(obj)
        if missing:
            raise InvalidScenarioError(f"missing scenario fields: {sorted(missing)}")
        return cls(**obj)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class IsotropicGaussianMixture:
    """Mixture of Gaussians sharing one isotropic variance."""

    means: np.ndarray  # (k, d)
    variance: float
    weights: np.ndarray  # (k,), nonnegative, sums to 1

    def __post_init__(self):
        means = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
        weights = np.asarray(self.weights, dtype=np.float64)
        if weights.ndim != 1 or weights.shape[0] != means.shape[0]:
            raise ValueError("weights must be one per component")
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be nonnegative and sum to 1 within 1e-12")
        if not self.variance > 0:
            raise ValueError("variance must be positive")
        object.__setattr__(self, "means", _frozen(means))
        object.__setattr__(self, "weights", _frozen(weights))

    @property
    def k(self) -> int:
        return self.means.shape[0]

    @property
    def d(self) -> int:
        return self.means.shape[1]

    def component_log_pdfs(self, x: np.ndarray) -> np.ndarray:
        """Per-component log N(x; mean_i, variance*I) + log w_i, shape (n, k)."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.d:
            raise ValueError(f"points have dimension {x.shape[1]}, mixture has {self.d}")
        sq = (
            np.sum(x * x, axis=1)[:, None]
            + np.sum(self.means * self.means, axis=1)[None, :]
            - 2.0 * (x @ self.means.T)
        )
        np.maximum(sq, 0.0, out=sq)
        norm = 0.5 * self.d * np.log(2.0 * np.pi * self.variance)
        with np.errstate(divide="ignore"):
            logw = np.log(self.weights)
        return (-0.5 / self.variance) * sq - norm + logw[None, :]

    def log_pdf(self, x: np.ndarray):
        """log-density at ``x``; log-sum-exp over components, never -inf overflow.

        Accepts a single d-vector (returns a float) or an (n, d) array
        (returns an (n,) array).
        """
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        comp = self.component_log_pdfs(x)
        m = np.max(comp, axis=1)
        out = m + np.log(np.sum(np.exp(comp - m[:, None]), axis=1))
        return float(out[0]) if single else out

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw n points: component by weight, then isotropic Gaussian noise."""
        if n == 0:
            return np.empty((0, self.d))
        comp = rng.choice(self.k, size=n, p=self.weights)
        return self.means[comp] + rng.standard_normal((n, self.d)) * np.sqrt(self.variance)


@dataclass(frozen=True)
class TvSDistribution:
    healthy: IsotropicGaussianMixture
    faulty: IsotropicGaussianMixture
    scenario: ScenarioSpec

    @property
    def d(self) -> int:
        return self.scenario.d


@dataclass(frozen=True)
class LabeledDataset:
    """Points with binary labels (1 = faulty/anomaly) and a provenance seed."""

    points: np.ndarray  # (n, d)
    labels: np.ndarray  # (n,) in {0, 1}
    seed: int

    def __post_init__(self):
        points = np.asarray(self.points, dtype=np.float64)
        if points.ndim != 2:
            raise ValueError(f"points must be an (n, d) matrix, got shape {points.shape}")
        labels = np.asarray(self.labels, dtype=np.int8)
        if labels.shape != (points.shape[0],):
            raise ValueError("label count must match point count")
        if labels.size and not np.all((labels == 0) | (labels == 1)):
            raise ValueError("labels must be binary")
        object.__setattr__(self, "points", _frozen(points))
        labels = np.ascontiguousarray(labels)
        labels.flags.writeable = False
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @property
    def n_faulty(self) -> int:
        return int(np.sum(self.labels == FAULTY))

    @property
    def n_healthy(self) -> int:
        return int(np.sum(self.labels == HEALTHY))

    def healthy_points(self) -> np.ndarray:
        return self.points[self.labels == HEALTHY]

    def faulty_points(self) -> np.ndarray:
        return self.points[self.labels == FAULTY]

    @classmethod
    def concat(cls, a: "LabeledDataset", b: "LabeledDataset", seed: int) -> "LabeledDataset":
        if a.d != b.d and len(a) and len(b):
            raise ValueError("dimension mismatch")
        return cls(
            np.vstack([a.points, b.points]),
            np.concatenate([a.labels, b.labels]),
            seed,
        )


def build_tvs(spec: ScenarioSpec) -> TvSDistribution:
    """Construct the TvS distribution for a scenario.

    Healthy mixture: equal-weight components at 0, +mu_a*1 and -mu_a*1 with
    variance sigma2_a.  Faulty mixture: ``n_clusters`` equal-weight
    components, each center an i.i.d. standard Gaussian vector normalized to
    norm mu/2 (drawn from ``placement_seed``), with variance sigma2_b.
    """
    d = spec.d
    ones = np.ones(d)
    healthy_means = np.stack([np.zeros(d), spec.mu_a * ones, -spec.mu_a * ones])
    healthy = IsotropicGaussianMixture(healthy_means, spec.sigma2_a, np.full(3, 1.0 / 3.0))

    rng = stream("tvs.placement", spec.placement_seed, spec.n_clusters, spec.d)
    centers = rng.standard_normal((spec.n_clusters, d))
    norms = np.linalg.norm(centers, axis=1, keepdims=True)
    # A zero draw cannot be normalized; resample those rows deterministically.
    while np.any(norms == 0.0):
        bad = norms[:, 0] == 0.0
        centers[bad] = rng.standard_normal((int(bad.sum()), d))
        norms = np.linalg.norm(centers, axis=1, keepdims=True)
    centers = centers / norms * spec.r_b
    faulty = IsotropicGaussianMixture(
        centers, spec.sigma2_b, np.full(spec.n_clusters, 1.0 / spec.n_clusters)
    )
    return TvSDistribution(healthy=healthy, faulty=faulty, scenario=spec)


def sample(dist: TvSDistribution, label: int, n: int, seed: int) -> LabeledDataset:
    """Draw n i.i.d. points from one class; deterministic in (spec, label, n, seed)."""
    if label not in (HEALTHY, FAULTY):
        raise ValueError(f"label must be 0 (healthy) or 1 (faulty), got {label}")
    if n < 0:
        raise ValueError("n must be >= 0")
    mixture = dist.faulty if label == FAULTY else dist.healthy
    rng = stream("tvs.sample", seed, label)
    points = mixture.sample(int(n), rng)
    return LabeledDataset(points, np.full(int(n), label, dtype=np.int8), seed)
