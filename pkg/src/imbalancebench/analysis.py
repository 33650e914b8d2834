"""Aggregation of simulation records: ranks, critical differences,
category maxima, and validation-to-test generalization statistics.

All functions consume the record dictionaries produced by the pipeline
(only complete records contribute; excluded simulations never enter any
aggregate) and group them by sweep coordinate (scenario, training size,
anomaly setting).  Percentile bounds use the same type-7 quantile as the
metrics module; AUCROC differences are reported in percentage points.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.stats

from .metrics import EmptySampleError, empirical_quantile

__all__ = [
    "RankTable",
    "CriticalDifferenceResult",
    "PredictionBounds",
    "GeneralizationReport",
    "complete_records",
    "rank_detectors",
    "critical_difference",
    "category_max",
    "mann_whitney_u",
    "significance",
    "generalization_bounds",
    "write_reports",
]

GroupKey = tuple  # (scenario, n_train_nominal, anomaly_mode, anomaly_value)


def _group_key(rec: dict) -> GroupKey:
    return (rec["scenario"], rec["n_train_nominal"], rec["anomaly_mode"], rec["anomaly_value"])


def complete_records(records) -> list[dict]:
    return [r for r in records if r["status"] == "complete"]


def _grouped(records) -> dict[GroupKey, list[dict]]:
    groups: dict[GroupKey, list[dict]] = {}
    for rec in complete_records(records):
        groups.setdefault(_group_key(rec), []).append(rec)
    if not groups:
        raise EmptySampleError("no complete records")
    return groups


def _detector_names(records: list[dict]) -> list[str]:
    names = [d["name"] for d in records[0]["detectors"]]
    for rec in records[1:]:
        if [d["name"] for d in rec["detectors"]] != names:
            raise ValueError("records do not share one detector suite")
    return names


@dataclass(frozen=True)
class RankTable:
    """Per-group average rank by test AUCROC (1 = best, mean-rank ties)."""

    detectors: list[str]
    groups: list[GroupKey]
    matrices: dict  # group -> (n_sims, n_detectors) per-simulation rank matrix
    average: dict  # group -> {detector: average rank}

    def to_rows(self) -> list[dict]:
        rows = []
        for group in self.groups:
            for det in self.detectors:
                rows.append(
                    {
                        "scenario": group[0],
                        "n_train_nominal": group[1],
                        "anomaly_mode": group[2],
                        "anomaly_value": group[3],
                        "detector": det,
                        "average_rank": self.average[group][det],
                        "n_simulations": self.matrices[group].shape[0],
                    }
                )
        return rows


def rank_detectors(records) -> RankTable:
    """Rank detectors within every simulation and average per group."""
    groups = _grouped(records)
    all_records = [r for recs in groups.values() for r in recs]
    names = _detector_names(all_records)
    matrices = {}
    average = {}
    for group in sorted(groups):
        recs = groups[group]
        auc = np.array([[d["test_aucroc"] for d in r["detectors"]] for r in recs])
        ranks = np.vstack([scipy.stats.rankdata(-row) for row in auc])
        matrices[group] = ranks
        average[group] = {n: float(ranks[:, i].mean()) for i, n in enumerate(names)}
    return RankTable(
        detectors=names, groups=sorted(groups), matrices=matrices, average=average
    )


def nemenyi_critical_distance(n_detectors: int, n_simulations: int, alpha: float = 0.05) -> float:
    """CD = q_alpha * sqrt(D(D+1) / (6M)); q from the studentized range at df=inf."""
    q = float(scipy.stats.studentized_range.ppf(1.0 - alpha, n_detectors, np.inf)) / math.sqrt(2.0)
    if not np.isfinite(q):
        q = float(scipy.stats.studentized_range.ppf(1.0 - alpha, n_detectors, 1e9)) / math.sqrt(2.0)
    return q * math.sqrt(n_detectors * (n_detectors + 1) / (6.0 * n_simulations))


@dataclass(frozen=True)
class CriticalDifferenceResult:
    detectors: list[str]
    mean_ranks: dict
    critical_distance: float
    friedman_chi2: float
    friedman_p: float
    alpha: float
    n_simulations: int
    groups: list[list[str]]  # detectors joined by a bar (gap below CD)

    def to_json_dict(self) -> dict:
        return {
            "detectors": self.detectors,
            "mean_ranks": self.mean_ranks,
            "critical_distance": self.critical_distance,
            "friedman_chi2": self.friedman_chi2,
            "friedman_p": self.friedman_p,
            "alpha": self.alpha,
            "n_simulations": self.n_simulations,
            "groups": self.groups,
        }


def critical_difference(rank_matrix, detectors, alpha: float = 0.05) -> CriticalDifferenceResult:
    """Friedman test plus Nemenyi grouping over a per-simulation rank matrix."""
    ranks = np.asarray(rank_matrix, dtype=np.float64)
    if ranks.ndim != 2 or ranks.shape[1] < 2 or ranks.shape[0] < 10:
        raise ValueError("need a rank matrix with >= 2 detectors and >= 10 simulations")
    if ranks.shape[1] != len(detectors):
        raise ValueError("detector names do not match rank matrix")
    m, d = ranks.shape
    mean_ranks = ranks.mean(axis=0)
    chi2 = 12.0 * m / (d * (d + 1)) * float(np.sum((mean_ranks - (d + 1) / 2.0) ** 2))
    p = float(scipy.stats.chi2.sf(chi2, d - 1))
    cd = nemenyi_critical_distance(d, m, alpha)

    order = np.argsort(mean_ranks, kind="stable")
    sorted_names = [detectors[i] for i in order]
    sorted_ranks = mean_ranks[order]
    # maximal runs of rank-sorted detectors whose span stays below CD
    intervals = []
    for i in range(d):
        j = i
        while j + 1 < d and sorted_ranks[j + 1] - sorted_ranks[i] < cd:
            j += 1
        intervals.append((i, j))
    unique_groups = [
        sorted_names[i : j + 1]
        for i, j in intervals
        if not any(a <= i and j <= b and (a, b) != (i, j) for a, b in intervals)
    ]
    return CriticalDifferenceResult(
        detectors=list(detectors),
        mean_ranks={n: float(r) for n, r in zip(detectors, mean_ranks)},
        critical_distance=float(cd),
        friedman_chi2=chi2,
        friedman_p=p,
        alpha=alpha,
        n_simulations=m,
        groups=unique_groups,
    )


def category_max(records, categories: dict | None = None) -> list[dict]:
    """Per (group, category) distribution of the per-simulation best AUCROC.

    Only count-mode records qualify (the sweep that varies the number of
    faulty examples directly).  Summaries are mean and 10th/90th
    percentiles of max test AUCROC over the detectors of each category.
    """
    count_records = [r for r in records if r["anomaly_mode"] == "count"]
    groups = _grouped(count_records)
    rows = []
    for group in sorted(groups):
        recs = groups[group]
        per_cat: dict[str, list[float]] = {}
        for rec in recs:
            best: dict[str, float] = {}
            for det in rec["detectors"]:
                cat = categories[det["name"]] if categories else det["category"]
                value = det["test_aucroc"]
                if cat not in best or value > best[cat]:
                    best[cat] = value
            for cat, value in best.items():
                per_cat.setdefault(cat, []).append(value)
        for cat in sorted(per_cat):
            values = per_cat[cat]
            rows.append(
                {
                    "scenario": group[0],
                    "n_train_nominal": group[1],
                    "anomaly_count": group[3],
                    "category": cat,
                    "mean_max_aucroc": float(np.mean(values)),
                    "p10_max_aucroc": empirical_quantile(values, 0.10),
                    "p90_max_aucroc": empirical_quantile(values, 0.90),
                    "n_simulations": len(values),
                }
            )
    return rows


def mann_whitney_u(group_a, group_b):
    """(U, p) of the two-sided Mann-Whitney test; U counts pairs a > b (ties half)."""
    a = np.asarray(group_a, dtype=np.float64)
    b = np.asarray(group_b, dtype=np.float64)
    if a.size == 0 or b.size == 0:
        raise EmptySampleError("both groups must be nonempty")
    res = scipy.stats.mannwhitneyu(a, b, alternative="two-sided")
    return float(res.statistic), float(res.pvalue)


def significance(group_a, group_b) -> float:
    """Two-sided Mann-Whitney U p-value."""
    return mann_whitney_u(group_a, group_b)[1]


@dataclass(frozen=True)
class PredictionBounds:
    """2.5th/97.5th percentiles of (test - validation) AUCROC, in points."""

    group: GroupKey
    detector: str  # detector name or "selected-by-validation"
    lower: float
    upper: float
    mean_sq_rank: float | None  # average rank by squared prediction error
    n_simulations: int


@dataclass(frozen=True)
class GeneralizationReport:
    selector: str  # "per-detector" | "best-by-validation"
    bounds: list[PredictionBounds]
    selection_frequency: dict | None  # group -> {"validation": {...}, "test": {...}} in percent


def _bounds(diffs: np.ndarray) -> tuple[float, float]:
    return empirical_quantile(diffs, 0.025), empirical_quantile(diffs, 0.975)


def generalization_bounds(records, selector: str = "per-detector") -> GeneralizationReport:
    """Validation-to-test prediction bounds, per detector or for the
    detector selected by highest validation AUCROC per simulation."""
    if selector not in ("per-detector", "best-by-validation"):
        raise ValueError("selector must be 'per-detector' or 'best-by-validation'")
    groups = _grouped(records)
    all_records = [r for recs in groups.values() for r in recs]
    names = _detector_names(all_records)
    bounds: list[PredictionBounds] = []

    if selector == "per-detector":
        for group in sorted(groups):
            recs = groups[group]
            val = np.array([[d["validation_aucroc"] for d in r["detectors"]] for r in recs])
            test = np.array([[d["test_aucroc"] for d in r["detectors"]] for r in recs])
            diffs = 100.0 * (test - val)
            sq_ranks = np.vstack([scipy.stats.rankdata(row**2) for row in diffs])
            for i, name in enumerate(names):
                lo, hi = _bounds(diffs[:, i])
                bounds.append(
                    PredictionBounds(
                        group=group,
                        detector=name,
                        lower=lo,
                        upper=hi,
                        mean_sq_rank=float(sq_ranks[:, i].mean()),
                        n_simulations=len(recs),
                    )
                )
        return GeneralizationReport(selector=selector, bounds=bounds, selection_frequency=None)

    freq: dict = {}
    for group in sorted(groups):
        recs = groups[group]
        val = np.array([[d["validation_aucroc"] for d in r["detectors"]] for r in recs])
        test = np.array([[d["test_aucroc"] for d in r["detectors"]] for r in recs])
        picked_val = np.argmax(val, axis=1)  # first index wins ties (suite order)
        picked_test = np.argmax(test, axis=1)
        diffs = 100.0 * (test[np.arange(len(recs)), picked_val] - val[np.arange(len(recs)), picked_val])
        lo, hi = _bounds(diffs)
        bounds.append(
            PredictionBounds(
                group=group,
                detector="selected-by-validation",
                lower=lo,
                upper=hi,
                mean_sq_rank=None,
                n_simulations=len(recs),
            )
        )
        freq[group] = {
            "validation": _frequency_table(picked_val, names),
            "test": _frequency_table(picked_test, names),
        }
    return GeneralizationReport(selector=selector, bounds=bounds, selection_frequency=freq)


def _frequency_table(picked: np.ndarray, names: list[str]) -> dict:
    counts = np.bincount(picked, minlength=len(names))
    return {
        name: int(math.floor(100.0 * counts[i] / picked.size + 0.5))
        for i, name in enumerate(names)
    }


# ---------------------------------------------------------------------------
# report files
# ---------------------------------------------------------------------------


def _write_csv(path: Path, columns: list[str], rows: list[dict]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(f".tmp-{os.getpid()}")
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow(
                [repr(v) if isinstance(v, float) else ("" if v is None else str(v)) for v in (row.get(c) for c in columns)]
            )
    os.replace(tmp, path)


def _group_cols(bound: PredictionBounds) -> dict:
    return {
        "scenario": bound.group[0],
        "n_train_nominal": bound.group[1],
        "anomaly_mode": bound.group[2],
        "anomaly_value": bound.group[3],
    }


def write_reports(records, out_dir, which: str = "all") -> list[Path]:
    """Emit the selected report artifacts; returns the written paths.

    ``which``: ranks | cd | category-max | bounds | selection | all.
    """
    out_dir = Path(out_dir)
    known = {"ranks", "cd", "category-max", "bounds", "selection"}
    lenient = which == "all"
    wanted = set(known) if lenient else {which}
    unknown = wanted - known
    if unknown:
        raise ValueError(f"unknown report(s): {sorted(unknown)}")
    written: list[Path] = []

    # under "all", reports whose preconditions fail (too few simulations for
    # a critical difference, no count-mode records) are skipped
    if lenient:
        if not any(r["anomaly_mode"] == "count" for r in complete_records(records)):
            wanted.discard("category-max")
        if len(complete_records(records)) < 10:
            wanted.discard("cd")

    if "ranks" in wanted:
        table = rank_detectors(records)
        path = out_dir / "ranks.csv"
        _write_csv(
            path,
            [
                "scenario",
                "n_train_nominal",
                "anomaly_mode",
                "anomaly_value",
                "detector",
                "average_rank",
                "n_simulations",
            ],
            table.to_rows(),
        )
        written.append(path)

    if "cd" in wanted:
        table = rank_detectors(records)
        stacked = np.vstack([table.matrices[g] for g in table.groups])
        result = critical_difference(stacked, table.detectors)
        path = out_dir / "cd.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(f".tmp-{os.getpid()}")
        tmp.write_text(json.dumps(result.to_json_dict(), sort_keys=True, indent=1) + "\n", "utf-8")
        os.replace(tmp, path)
        written.append(path)

    if "category-max" in wanted:
        rows = category_max(records)
        path = out_dir / "category_max.csv"
        _write_csv(
            path,
            [
                "scenario",
                "n_train_nominal",
                "anomaly_count",
                "category",
                "mean_max_aucroc",
                "p10_max_aucroc",
                "p90_max_aucroc",
                "n_simulations",
            ],
            rows,
        )
        written.append(path)

    if "bounds" in wanted:
        report = generalization_bounds(records, "per-detector")
        rows = [
            {
                **_group_cols(b),
                "detector": b.detector,
                "lower": b.lower,
                "upper": b.upper,
                "mean_sq_rank": b.mean_sq_rank,
                "n_simulations": b.n_simulations,
            }
            for b in report.bounds
        ]
        path = out_dir / "prediction_bounds.csv"
        _write_csv(
            path,
            [
                "scenario",
                "n_train_nominal",
                "anomaly_mode",
                "anomaly_value",
                "detector",
                "lower",
                "upper",
                "mean_sq_rank",
                "n_simulations",
            ],
            rows,
        )
        written.append(path)

    if "selection" in wanted:
        report = generalization_bounds(records, "best-by-validation")
        bound_rows = [
            {
                **_group_cols(b),
                "lower": b.lower,
                "upper": b.upper,
                "n_simulations": b.n_simulations,
            }
            for b in report.bounds
        ]
        path = out_dir / "selected_bounds.csv"
        _write_csv(
            path,
            [
                "scenario",
                "n_train_nominal",
                "anomaly_mode",
                "anomaly_value",
                "lower",
                "upper",
                "n_simulations",
            ],
            bound_rows,
        )
        written.append(path)
        freq_rows = []
        for group in sorted(report.selection_frequency):
            tables = report.selection_frequency[group]
            for detector in tables["validation"]:
                freq_rows.append(
                    {
                        "scenario": group[0],
                        "n_train_nominal": group[1],
                        "anomaly_mode": group[2],
                        "anomaly_value": group[3],
                        "detector": detector,
                        "validation_pct": tables["validation"][detector],
                        "test_pct": tables["test"][detector],
                    }
                )
        path = out_dir / "selection_frequency.csv"
        _write_csv(
            path,
            [
                "scenario",
                "n_train_nominal",
                "anomaly_mode",
                "anomaly_value",
                "detector",
                "validation_pct",
                "test_pct",
            ],
            freq_rows,
        )
        written.append(path)

    return written
