"""Experiment orchestration: one simulation end to end, and seeded sweeps.

A simulation draws a jittered training set, tunes every detector by
cross-validation, refits each on the full training set, scores a large
50/50 test set, and evaluates the Bayes-optimal reference on the same test
points.  All detectors must succeed for the simulation to count: any
failure at any stage marks the record excluded with a reason and publishes
no partial metrics.

Every random draw derives from (master_seed, coordinate, purpose), so
records are bit-identical however the sweep is scheduled; test-point
streams are disjoint from training streams by purpose tag.  Sweeps persist
one JSON document per simulation (atomic write-then-rename) and skip
already-persisted coordinates on resume.  Wall-clock timings ride along in
the record under ``timings`` but are excluded from the consolidated CSV
and from determinism comparisons, being the one field that cannot
reproduce.
"""

from __future__ import annotations

import csv
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from ._rng import derive_seed
from .detectors import DetectorSpec, FitError, detector_category, fit
from .metrics import ScoreSet, aucroc, fnr_at_threshold, fpr_at_threshold, threshold_for_fpr
from .oracle import gt_score
from .synth import FAULTY, HEALTHY, LabeledDataset, ScenarioSpec, build_tvs, sample
from .tuning import DetectorFailedError, InsufficientAnomaliesError, grid_search, plan_folds

__all__ = [
    "SimulationConfig",
    "DetectorOutcome",
    "SimulationRecord",
    "run_simulation",
    "run_experiment",
    "record_path",
    "load_records",
    "write_consolidated_csv",
    "CSV_COLUMNS",
]

GT_AUCROC_BAND = (0.985, 0.995)
MIN_FAULTY_FOR_CV = 5


@dataclass(frozen=True)
class SimulationConfig:
    """Everything one simulation needs, independent of scheduling."""

    scenario_name: str
    scenario: ScenarioSpec
    n_train_nominal: int
    anomaly_rate: float | None  # exactly one of rate/count is set
    anomaly_count: int | None
    simulation_index: int
    master_seed: int
    train_jitter: int = 2
    n_test_batches: int = 40
    test_batch_size: int = 1024
    test_anomaly_rate: float = 0.5
    target_fpr: float = 0.01
    threshold_on: str = "test"  # or "validation": transfer the CV threshold

    def __post_init__(self):
        if (self.anomaly_rate is None) == (self.anomaly_count is None):
            raise ValueError("exactly one of anomaly_rate / anomaly_count must be set")
        if self.threshold_on not in ("test", "validation"):
            raise ValueError("threshold_on must be 'test' or 'validation'")

    @property
    def anomaly_mode(self) -> str:
        return "rate" if self.anomaly_rate is not None else "count"

    @property
    def anomaly_value(self):
        return self.anomaly_rate if self.anomaly_rate is not None else self.anomaly_count

    def coordinate_key(self) -> str:
        value = f"{self.anomaly_value:g}" if self.anomaly_mode == "rate" else str(self.anomaly_value)
        return (
            f"{self.scenario_name}|{self.n_train_nominal}|{self.anomaly_mode}={value}"
            f"|{self.simulation_index}"
        )

    def _seed(self, purpose: str) -> int:
        return derive_seed(self.master_seed, self.coordinate_key(), purpose)


@dataclass(frozen=True)
class DetectorOutcome:
    name: str
    category: str
    chosen_hp: dict
    excluded_hp_count: int
    validation_aucroc: float
    validation_fpr: float
    validation_fnr: float
    test_aucroc: float
    test_fpr: float
    test_fnr: float


@dataclass
class SimulationRecord:
    config: SimulationConfig
    status: str  # "complete" | "excluded"
    exclusion_reason: str | None
    n_train: int
    n_faulty_train: int
    detectors: list[DetectorOutcome] = field(default_factory=list)
    ground_truth: dict | None = None  # test_aucroc/test_fpr/test_fnr of the reference
    flags: list[str] = field(default_factory=list)
    timings: dict = field(default_factory=dict)  # detector -> wall seconds; non-deterministic

    def to_json_dict(self, include_timings: bool = True) -> dict:
        cfg = self.config
        out = {
            "schema_version": 1,
            "scenario": cfg.scenario_name,
            "scenario_spec": cfg.scenario.to_json_dict(),
            "n_train_nominal": cfg.n_train_nominal,
            "anomaly_mode": cfg.anomaly_mode,
            "anomaly_value": cfg.anomaly_value,
            "simulation_index": cfg.simulation_index,
            "master_seed": cfg.master_seed,
            "train_jitter": cfg.train_jitter,
            "n_test_batches": cfg.n_test_batches,
            "test_batch_size": cfg.test_batch_size,
            "test_anomaly_rate": cfg.test_anomaly_rate,
            "target_fpr": cfg.target_fpr,
            "threshold_on": cfg.threshold_on,
            "status": self.status,
            "exclusion_reason": self.exclusion_reason,
            "n_train": self.n_train,
            "n_faulty_train": self.n_faulty_train,
            "flags": list(self.flags),
            "ground_truth": self.ground_truth,
            "detectors": [
                {
                    "name": d.name,
                    "category": d.category,
                    "chosen_hp": d.chosen_hp,
                    "excluded_hp_count": d.excluded_hp_count,
                    "validation_aucroc": d.validation_aucroc,
                    "validation_fpr": d.validation_fpr,
                    "validation_fnr": d.validation_fnr,
                    "test_aucroc": d.test_aucroc,
                    "test_fpr": d.test_fpr,
                    "test_fnr": d.test_fnr,
                }
                for d in self.detectors
            ],
        }
        if include_timings:
            out["timings"] = dict(self.timings)
        return out


def _excluded(cfg, reason, n_train, n_faulty) -> SimulationRecord:
    return SimulationRecord(
        config=cfg,
        status="excluded",
        exclusion_reason=reason,
        n_train=n_train,
        n_faulty_train=n_faulty,
    )


def run_simulation(cfg: SimulationConfig, suite: list[DetectorSpec]) -> SimulationRecord:
    """Run one seeded simulation; failures become exclusion reasons."""
    if not suite:
        raise ValueError("detector suite must not be empty")
    dist = build_tvs(cfg.scenario)

    jitter_rng = np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(cfg._seed("jitter")))
    )
    half = int(cfg.train_jitter)
    n_train = int(cfg.n_train_nominal + jitter_rng.integers(-half, half + 1))
    if cfg.anomaly_count is not None:
        n_faulty = int(cfg.anomaly_count)
    else:
        n_faulty = int(np.floor(cfg.anomaly_rate * n_train + 0.5))
    n_healthy = n_train - n_faulty
    if n_faulty < MIN_FAULTY_FOR_CV:
        return _excluded(
            cfg, f"insufficient-anomalies: {n_faulty} faulty < {MIN_FAULTY_FOR_CV}", n_train, n_faulty
        )
    if n_healthy <= 0:
        return _excluded(cfg, "no healthy training examples", n_train, n_faulty)

    train = LabeledDataset.concat(
        sample(dist, HEALTHY, n_healthy, cfg._seed("train-healthy")),
        sample(dist, FAULTY, n_faulty, cfg._seed("train-faulty")),
        seed=cfg._seed("train-healthy"),
    )

    try:
        plan = plan_folds(train, k=5, seed=cfg._seed("folds"))
    except InsufficientAnomaliesError as exc:
        return _excluded(cfg, f"insufficient-anomalies: {exc}", n_train, n_faulty)

    n_test = cfg.n_test_batches * cfg.test_batch_size
    n_test_f = int(np.floor(cfg.test_anomaly_rate * n_test + 0.5))
    test = LabeledDataset.concat(
        sample(dist, HEALTHY, n_test - n_test_f, cfg._seed("test-healthy")),
        sample(dist, FAULTY, n_test_f, cfg._seed("test-faulty")),
        seed=cfg._seed("test-healthy"),
    )
    test_labels = np.asarray(test.labels)

    outcomes: list[DetectorOutcome] = []
    timings: dict[str, float] = {}
    for spec in suite:
        started = time.perf_counter()
        try:
            result = grid_search(spec, train, plan, cfg.target_fpr)
            model = fit(spec, result.chosen_hp, train)
            scores = model.score(test.points)
        except DetectorFailedError as exc:
            return _excluded(cfg, f"detector-failed: {exc}", n_train, n_faulty)
        except FitError as exc:
            return _excluded(cfg, f"refit-failed: {exc}", n_train, n_faulty)
        ss = ScoreSet(healthy=scores[test_labels == HEALTHY], faulty=scores[test_labels == FAULTY])
        if cfg.threshold_on == "test":
            thr = threshold_for_fpr(ss.healthy, cfg.target_fpr)
        else:
            thr = result.validation_threshold
        outcomes.append(
            DetectorOutcome(
                name=spec.name,
                category=spec.category,
                chosen_hp=result.chosen_hp,
                excluded_hp_count=result.excluded_hp_count,
                validation_aucroc=result.validation_aucroc,
                validation_fpr=result.validation_fpr,
                validation_fnr=result.validation_fnr,
                test_aucroc=aucroc(ss),
                test_fpr=fpr_at_threshold(ss.healthy, thr),
                test_fnr=fnr_at_threshold(ss.faulty, thr),
            )
        )
        timings[spec.name] = time.perf_counter() - started

    gt_scores = gt_score(dist, test.points)
    gt_ss = ScoreSet(
        healthy=gt_scores[test_labels == HEALTHY], faulty=gt_scores[test_labels == FAULTY]
    )
    gt_thr = threshold_for_fpr(gt_ss.healthy, cfg.target_fpr)
    gt_auc = aucroc(gt_ss)
    ground_truth = {
        "test_aucroc": gt_auc,
        "test_fpr": fpr_at_threshold(gt_ss.healthy, gt_thr),
        "test_fnr": fnr_at_threshold(gt_ss.faulty, gt_thr),
    }
    flags = []
    if not GT_AUCROC_BAND[0] <= gt_auc <= GT_AUCROC_BAND[1]:
        flags.append("gt-aucroc-outside-expected-band")

    return SimulationRecord(
        config=cfg,
        status="complete",
        exclusion_reason=None,
        n_train=n_train,
        n_faulty_train=n_faulty,
        detectors=outcomes,
        ground_truth=ground_truth,
        flags=flags,
        timings=timings,
    )


# ---------------------------------------------------------------------------
# sweep execution and persistence
# ---------------------------------------------------------------------------


def _setting_dirname(mode: str, value) -> str:
    return f"rate-{value:g}" if mode == "rate" else f"count-{value}"


def record_path(results_dir, cfg: SimulationConfig) -> Path:
    return (
        Path(results_dir)
        / cfg.scenario_name
        / f"n{cfg.n_train_nominal}"
        / _setting_dirname(cfg.anomaly_mode, cfg.anomaly_value)
        / f"{cfg.simulation_index:04d}.json"
    )


def _atomic_write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(f".tmp-{os.getpid()}")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _record_json(record: SimulationRecord) -> str:
    return json.dumps(record.to_json_dict(), sort_keys=True, indent=1) + "\n"


def experiment_simulations(exp) -> list[SimulationConfig]:
    """All simulation configs of a sweep, in canonical order."""
    settings = [("rate", r) for r in exp.anomaly_rates] + [
        ("count", c) for c in exp.anomaly_counts
    ]
    configs = []
    for scenario_name in exp.scenarios:
        spec = exp.scenarios[scenario_name]
        for size in exp.sizes:
            for mode, value in settings:
                for rep in range(exp.repetitions):
                    configs.append(
                        SimulationConfig(
                            scenario_name=scenario_name,
                            scenario=spec,
                            n_train_nominal=int(size),
                            anomaly_rate=float(value) if mode == "rate" else None,
                            anomaly_count=int(value) if mode == "count" else None,
                            simulation_index=rep,
                            master_seed=exp.master_seed,
                            train_jitter=exp.train_jitter,
                            n_test_batches=exp.n_test_batches,
                            test_batch_size=exp.test_batch_size,
                            test_anomaly_rate=exp.test_anomaly_rate,
                            target_fpr=exp.target_fpr,
                            threshold_on=exp.threshold_on,
                        )
                    )
    return configs


def _run_and_persist(args) -> SimulationRecord:
    cfg, suite, results_dir = args
    record = run_simulation(cfg, suite)
    _atomic_write_text(record_path(results_dir, cfg), _record_json(record))
    return record


def run_experiment(
    exp,
    results_dir=None,
    resume: bool = False,
    parallelism: int | None = None,
    progress=None,
) -> Iterator[SimulationRecord]:
    """Run the sweep, persisting records as they finish; yields new records.

    Already-persisted coordinates are skipped when ``resume`` is true.
    Each simulation's seeds derive from its coordinates alone, so the
    schedule (or the worker count) cannot change any record's content.
    """
    results_dir = Path(results_dir if results_dir is not None else exp.output_dir)
    suite = exp.detectors
    parallelism = parallelism if parallelism is not None else exp.parallelism
    todo = []
    for cfg in experiment_simulations(exp):
        path = record_path(results_dir, cfg)
        if resume and path.exists():
            continue
        todo.append(cfg)

    if parallelism <= 1:
        for cfg in todo:
            record = run_simulation(cfg, suite)
            _atomic_write_text(record_path(results_dir, cfg), _record_json(record))
            if progress is not None:
                progress(cfg, record)
            yield record
        return

    with ProcessPoolExecutor(max_workers=parallelism) as pool:
        for cfg, record in zip(
            todo, pool.map(_run_and_persist, ((c, suite, results_dir) for c in todo))
        ):
            if progress is not None:
                progress(cfg, record)
            yield record


def _load_record_file(path: Path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def load_records(results_dir) -> list[dict]:
    """All persisted records under a results directory, in canonical order.

    Only files matching the record layout (scenario/size/setting/NNNN.json)
    are read; report artifacts living elsewhere are ignored.
    """
    paths = sorted(Path(results_dir).glob("*/*/*/*.json"))
    return [_load_record_file(p) for p in paths]


CSV_COLUMNS = [
    "scenario",
    "n_train_nominal",
    "anomaly_mode",
    "anomaly_value",
    "simulation_index",
    "status",
    "exclusion_reason",
    "n_train",
    "n_faulty_train",
    "detector",
    "category",
    "chosen_hp",
    "excluded_hp_count",
    "validation_aucroc",
    "validation_fpr",
    "validation_fnr",
    "test_aucroc",
    "test_fpr",
    "test_fnr",
    "gt_test_aucroc",
    "gt_test_fpr",
    "gt_test_fnr",
]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _record_sort_key(rec: dict):
    return (
        rec["scenario"],
        rec["n_train_nominal"],
        rec["anomaly_mode"],
        float(rec["anomaly_value"]),
        rec["simulation_index"],
    )


def write_consolidated_csv(results_dir, out_path=None) -> Path:
    """One CSV row per detector per simulation (excluded sims get one row).

    Deterministic: rows sorted by coordinates, floats serialized by repr,
    timings omitted.  Re-running on unchanged results is byte-identical.
    """
    results_dir = Path(results_dir)
    out_path = Path(out_path) if out_path is not None else results_dir / "consolidated.csv"
    records = sorted(load_records(results_dir), key=_record_sort_key)
    rows = []
    for rec in records:
        base = {
            "scenario": rec["scenario"],
            "n_train_nominal": rec["n_train_nominal"],
            "anomaly_mode": rec["anomaly_mode"],
            "anomaly_value": rec["anomaly_value"],
            "simulation_index": rec["simulation_index"],
            "status": rec["status"],
            "exclusion_reason": rec["exclusion_reason"],
            "n_train": rec["n_train"],
            "n_faulty_train": rec["n_faulty_train"],
        }
        gt = rec.get("ground_truth") or {}
        if rec["status"] != "complete":
            rows.append({**base, "detector": "", "category": "", "chosen_hp": ""})
            continue
        for det in rec["detectors"]:
            rows.append(
                {
                    **base,
                    "detector": det["name"],
                    "category": det["category"],
                    "chosen_hp": json.dumps(det["chosen_hp"], sort_keys=True),
                    "excluded_hp_count": det["excluded_hp_count"],
                    "validation_aucroc": det["validation_aucroc"],
                    "validation_fpr": det["validation_fpr"],
                    "validation_fnr": det["validation_fnr"],
                    "test_aucroc": det["test_aucroc"],
                    "test_fpr": det["test_fpr"],
                    "test_fnr": det["test_fnr"],
                    "gt_test_aucroc": gt.get("test_aucroc"),
                    "gt_test_fpr": gt.get("test_fpr"),
                    "gt_test_fnr": gt.get("test_fnr"),
                }
            )
    tmp = out_path.with_suffix(f".tmp-{os.getpid()}")
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(row.get(col)) for col in CSV_COLUMNS])
    os.replace(tmp, out_path)
    return out_path
