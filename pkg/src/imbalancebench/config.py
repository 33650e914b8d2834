"""Experiment configuration: schema, presets, JSON (de)serialization.

Configs are single human-editable JSON documents with a versioned schema.
Parsing is strict -- unknown fields are rejected with the offending path --
and round-trips losslessly.  Two scenarios ship as presets:

    S1: d=2,  mu=2.8,  sigma2_a=0.05, sigma2_b=0.4   (easy case)
    S2: d=10, mu=1.05, sigma2_a=0.02, sigma2_b=0.04  (hard case)

both with 200 faulty clusters from a fixed placement seed, so their ground
truth is a constant of the package.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .detectors import DetectorSpec, default_suite, detector_category, grid_from_mapping
from .synth import ScenarioSpec

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "PRESET_SCENARIOS",
    "preset_scenario",
    "default_experiment_config",
    "load_config",
    "dump_config",
]

SCHEMA_VERSION = 1

PRESET_SCENARIOS = {
    "S1": ScenarioSpec(d=2, mu=2.8, sigma2_a=0.05, sigma2_b=0.4, n_clusters=200, placement_seed=777),
    "S2": ScenarioSpec(d=10, mu=1.05, sigma2_a=0.02, sigma2_b=0.04, n_clusters=200, placement_seed=777),
}


class ConfigError(ValueError):
    """Malformed experiment configuration; message carries the field path."""


def preset_scenario(name: str) -> ScenarioSpec:
    try:
        return PRESET_SCENARIOS[name]
    except KeyError:
        raise ConfigError(f"unknown scenario preset {name!r}; known: {sorted(PRESET_SCENARIOS)}")


@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative sweep description: scenarios x sizes x anomaly settings x reps."""

    scenarios: dict  # name -> ScenarioSpec
    sizes: tuple
    repetitions: int
    detectors: tuple  # DetectorSpec, enumeration order is the tie-break order
    anomaly_rates: tuple = ()
    anomaly_counts: tuple = ()
    target_fpr: float = 0.01
    master_seed: int = 0
    output_dir: str = "results"
    parallelism: int = 1
    train_jitter: int = 2
    n_test_batches: int = 40
    test_batch_size: int = 1024
    test_anomaly_rate: float = 0.5
    threshold_on: str = "test"

    def __post_init__(self):
        if not self.scenarios:
            raise ConfigError("scenarios: at least one scenario required")
        if not self.sizes:
            raise ConfigError("sizes: at least one training size required")
        if not self.anomaly_rates and not self.anomaly_counts:
            raise ConfigError("anomaly settings: need anomaly_rates and/or anomaly_counts")
        if self.repetitions < 1:
            raise ConfigError("repetitions: must be >= 1")
        if not 0.0 < self.target_fpr < 1.0:
            raise ConfigError("target_fpr: must lie strictly between 0 and 1")
        if not 0.0 < self.test_anomaly_rate < 1.0:
            raise ConfigError("test_anomaly_rate: must lie strictly between 0 and 1")
        if self.parallelism < 1:
            raise ConfigError("parallelism: must be >= 1")
        if self.threshold_on not in ("test", "validation"):
            raise ConfigError("threshold_on: must be 'test' or 'validation'")
        if not self.detectors:
            raise ConfigError("detectors: suite must not be empty")
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))
        object.__setattr__(self, "anomaly_rates", tuple(float(r) for r in self.anomaly_rates))
        object.__setattr__(self, "anomaly_counts", tuple(int(c) for c in self.anomaly_counts))
        object.__setattr__(self, "detectors", tuple(self.detectors))


def default_experiment_config(**overrides) -> ExperimentConfig:
    """The paper-style sweep at its full scale (trim before running casually)."""
    base = dict(
        scenarios=dict(PRESET_SCENARIOS),
        sizes=(1000, 2000, 5000, 10000),
        anomaly_rates=(0.005,),
        repetitions=100,
        detectors=tuple(default_suite()),
        target_fpr=0.01,
        master_seed=0,
        output_dir="results",
        parallelism=1,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


# --- JSON serialization -----------------------------------------------------

_TOP_FIELDS = {
    "schema_version",
    "scenarios",
    "sizes",
    "anomaly_rates",
    "anomaly_counts",
    "repetitions",
    "detectors",
    "target_fpr",
    "master_seed",
    "output_dir",
    "parallelism",
    "train_jitter",
    "n_test_batches",
    "test_batch_size",
    "test_anomaly_rate",
    "threshold_on",
}

_DETECTOR_FIELDS = {"name", "category", "grid", "fixed"}


def _detector_to_json(spec: DetectorSpec) -> dict:
    grid_values: dict[str, list] = {}
    for hp in spec.grid:
        for key, value in hp.items():
            grid_values.setdefault(key, [])
            if value not in grid_values[key]:
                grid_values[key].append(value)
    return {
        "name": spec.name,
        "category": spec.category,
        "grid": grid_values,
        "fixed": dict(spec.fixed),
    }


def _detector_from_json(obj: dict, index: int) -> DetectorSpec:
    if not isinstance(obj, dict):
        raise ConfigError(f"detectors[{index}]: expected an object")
    unknown = set(obj) - _DETECTOR_FIELDS
    if unknown:
        raise ConfigError(f"detectors[{index}]: unknown fields {sorted(unknown)}")
    if "name" not in obj:
        raise ConfigError(f"detectors[{index}]: missing 'name'")
    name = obj["name"]
    try:
        category = obj.get("category") or detector_category(name)
    except KeyError as exc:
        raise ConfigError(f"detectors[{index}]: {exc}")
    grid_map = obj.get("grid", {})
    if not isinstance(grid_map, dict):
        raise ConfigError(f"detectors[{index}].grid: expected an object of value lists")
    for key, values in grid_map.items():
        if not isinstance(values, list) or not values:
            raise ConfigError(f"detectors[{index}].grid.{key}: expected a nonempty list")
    return DetectorSpec(
        name=name,
        category=category,
        grid=grid_from_mapping(grid_map),
        fixed=obj.get("fixed", {}),
    )


def config_to_json_dict(exp: ExperimentConfig) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "scenarios": {name: spec.to_json_dict() for name, spec in exp.scenarios.items()},
        "sizes": list(exp.sizes),
        "anomaly_rates": list(exp.anomaly_rates),
        "anomaly_counts": list(exp.anomaly_counts),
        "repetitions": exp.repetitions,
        "detectors": [_detector_to_json(d) for d in exp.detectors],
        "target_fpr": exp.target_fpr,
        "master_seed": exp.master_seed,
        "output_dir": exp.output_dir,
        "parallelism": exp.parallelism,
        "train_jitter": exp.train_jitter,
        "n_test_batches": exp.n_test_batches,
        "test_batch_size": exp.test_batch_size,
        "test_anomaly_rate": exp.test_anomaly_rate,
        "threshold_on": exp.threshold_on,
    }


def config_from_json_dict(obj: dict) -> ExperimentConfig:
    if not isinstance(obj, dict):
        raise ConfigError("config root: expected an object")
    unknown = set(obj) - _TOP_FIELDS
    if unknown:
        raise ConfigError(f"config root: unknown fields {sorted(unknown)}")
    version = obj.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version: expected {SCHEMA_VERSION}, got {version!r}")
    for required in ("scenarios", "sizes", "repetitions", "detectors"):
        if required not in obj:
            raise ConfigError(f"{required}: missing required field")

    scenarios = {}
    if not isinstance(obj["scenarios"], dict):
        raise ConfigError("scenarios: expected an object of scenario specs")
    for name, spec_obj in obj["scenarios"].items():
        try:
            scenarios[name] = ScenarioSpec.from_json_dict(spec_obj)
        except Exception as exc:
            raise ConfigError(f"scenarios.{name}: {exc}")

    detectors = [
        _detector_from_json(d, i) for i, d in enumerate(obj["detectors"])
    ]
    kwargs = dict(
        scenarios=scenarios,
        sizes=obj["sizes"],
        anomaly_rates=obj.get("anomaly_rates", []),
        anomaly_counts=obj.get("anomaly_counts", []),
        repetitions=obj["repetitions"],
        detectors=detectors,
    )
    for key in (
        "target_fpr",
        "master_seed",
        "output_dir",
        "parallelism",
        "train_jitter",
        "n_test_batches",
        "test_batch_size",
        "test_anomaly_rate",
        "threshold_on",
    ):
        if key in obj:
            kwargs[key] = obj[key]
    return ExperimentConfig(**kwargs)


def load_config(path) -> ExperimentConfig:
    text = Path(path).read_text(encoding="utf-8")
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}")
    try:
        return config_from_json_dict(obj)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}")


def dump_config(exp: ExperimentConfig, path) -> None:
    Path(path).write_text(
        json.dumps(config_to_json_dict(exp), indent=2, sort_keys=False) + "\n", encoding="utf-8"
    )
