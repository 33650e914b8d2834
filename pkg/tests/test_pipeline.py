import json
from pathlib import Path

import numpy as np
import pytest

from imbalancebench.config import default_experiment_config, preset_scenario
from imbalancebench.detectors import default_suite
from imbalancebench.pipeline import (
    CSV_COLUMNS,
    SimulationConfig,
    experiment_simulations,
    load_records,
    record_path,
    run_experiment,
    run_simulation,
    write_consolidated_csv,
)


def small_cfg(**overrides):
    base = dict(
        scenario_name="S1",
        scenario=preset_scenario("S1"),
        n_train_nominal=260,
        anomaly_rate=None,
        anomaly_count=8,
        simulation_index=0,
        master_seed=42,
        n_test_batches=2,
        test_batch_size=256,
    )
    base.update(overrides)
    return SimulationConfig(**base)


FAST_SUITE = default_suite(["knn", "cblof", "xgb"])


class TestSimulationConfig:
    def test_exactly_one_anomaly_setting(self):
        with pytest.raises(ValueError):
            small_cfg(anomaly_rate=0.01, anomaly_count=8)
        with pytest.raises(ValueError):
            small_cfg(anomaly_count=None)

    def test_coordinate_key_stable(self):
        cfg = small_cfg()
        assert cfg.coordinate_key() == "S1|260|count=8|0"
        rate_cfg = small_cfg(anomaly_count=None, anomaly_rate=0.005)
        assert rate_cfg.coordinate_key() == "S1|260|rate=0.005|0"


class TestRunSimulation:
    def test_too_few_anomalies_excluded_upfront(self):
        record = run_simulation(small_cfg(anomaly_count=4), FAST_SUITE)
        assert record.status == "excluded"
        assert "insufficient-anomalies" in record.exclusion_reason
        assert record.detectors == []

    def test_complete_record_shape(self):
        record = run_simulation(small_cfg(), FAST_SUITE)
        assert record.status == "complete"
        assert [d.name for d in record.detectors] == ["knn", "cblof", "xgb"]
        assert record.n_train in range(258, 263)
        assert record.n_faulty_train == 8
        gt = record.ground_truth
        assert set(gt) == {"test_aucroc", "test_fpr", "test_fnr"}
        for d in record.detectors:
            assert 0.0 <= d.test_aucroc <= 1.0
            assert 0.0 <= d.validation_aucroc <= 1.0
        assert set(record.timings) == {"knn", "cblof", "xgb"}

    def test_rate_mode_rounding(self):
        record = run_simulation(
            small_cfg(anomaly_count=None, anomaly_rate=0.03, n_train_nominal=400), FAST_SUITE
        )
        assert record.n_faulty_train == round(0.03 * record.n_train)

    def test_jitter_within_band(self):
        sizes = set()
        for idx in range(12):
            record = run_simulation(small_cfg(simulation_index=idx, anomaly_count=4), FAST_SUITE)
            sizes.add(record.n_train)
        assert all(258 <= s <= 262 for s in sizes)
        assert len(sizes) > 1

    def test_deterministic_records(self):
        a = run_simulation(small_cfg(), FAST_SUITE)
        b = run_simulation(small_cfg(), FAST_SUITE)
        da, db = a.to_json_dict(include_timings=False), b.to_json_dict(include_timings=False)
        assert da == db

    def test_test_set_size_and_split(self):
        cfg = small_cfg()
        record = run_simulation(cfg, FAST_SUITE)
        # achieved GT fpr is measured on n_test/2 healthy points
        assert record.ground_truth["test_fpr"] == pytest.approx(cfg.target_fpr, abs=0.02)

    def test_gt_band_flag(self):
        # S1/S2 presets sit inside the expected ground-truth band
        record = run_simulation(small_cfg(), FAST_SUITE)
        assert 0.985 <= record.ground_truth["test_aucroc"] <= 0.995
        assert record.flags == []

    def test_threshold_transfer_mode(self):
        on_test = run_simulation(small_cfg(), FAST_SUITE)
        transfer = run_simulation(small_cfg(threshold_on="validation"), FAST_SUITE)
        # same tuning, different thresholding semantics
        assert [d.name for d in transfer.detectors] == [d.name for d in on_test.detectors]
        assert any(
            t.test_fpr != o.test_fpr for t, o in zip(transfer.detectors, on_test.detectors)
        )


class TestRunExperiment:
    def test_sweep_coordinates(self):
        exp = default_experiment_config(
            sizes=(100, 200),
            anomaly_rates=(0.02,),
            anomaly_counts=(10,),
            repetitions=3,
            detectors=tuple(FAST_SUITE),
        )
        sims = experiment_simulations(exp)
        assert len(sims) == 2 * 2 * 2 * 3  # scenarios x sizes x settings x reps
        keys = [cfg.coordinate_key() for cfg in sims]
        assert len(set(keys)) == len(keys)

    def test_distinct_seeds_per_repetition(self, tmp_path):
        exp = default_experiment_config(
            scenarios={"S1": preset_scenario("S1")},
            sizes=(240,),
            anomaly_rates=(0.04,),
            repetitions=3,
            detectors=tuple(FAST_SUITE),
            output_dir=str(tmp_path / "r"),
            n_test_batches=2,
            test_batch_size=256,
        )
        records = list(run_experiment(exp))
        assert len(records) == 3
        aucs = {tuple(d.test_aucroc for d in r.detectors) for r in records}
        assert len(aucs) == 3  # different draws -> different metrics

    def test_resume_skips_existing(self, tmp_path):
        results = tmp_path / "res"
        exp = default_experiment_config(
            scenarios={"S1": preset_scenario("S1")},
            sizes=(240,),
            anomaly_rates=(0.04,),
            repetitions=3,
            detectors=tuple(FAST_SUITE),
            output_dir=str(results),
            n_test_batches=2,
            test_batch_size=256,
        )
        list(run_experiment(exp))
        paths = sorted(results.rglob("*.json"))
        assert len(paths) == 3
        victim = paths[1]
        keep_bytes = {p: p.read_bytes() for p in paths if p != victim}
        stamps = {p: p.stat().st_mtime_ns for p in paths if p != victim}
        victim.unlink()

        new_records = list(run_experiment(exp, resume=True))
        assert len(new_records) == 1  # only the missing coordinate recomputed
        assert victim.exists()
        for p, stamp in stamps.items():
            assert p.stat().st_mtime_ns == stamp
            assert p.read_bytes() == keep_bytes[p]

    def test_excluded_records_counted_separately(self, toy_results):
        _, records = toy_results
        statuses = {r["status"] for r in records}
        assert "complete" in statuses
        for rec in records:
            if rec["status"] == "excluded":
                assert rec["detectors"] == []
                assert rec["exclusion_reason"]


class TestConsolidatedCsv:
    def test_columns_and_rows(self, toy_results):
        results_dir, records = toy_results
        csv_path = results_dir / "consolidated.csv"
        lines = csv_path.read_text().splitlines()
        assert lines[0] == ",".join(CSV_COLUMNS)
        complete = [r for r in records if r["status"] == "complete"]
        excluded = [r for r in records if r["status"] == "excluded"]
        assert len(lines) - 1 == len(complete) * 8 + len(excluded)

    def test_rewrite_is_byte_identical(self, toy_results, tmp_path):
        results_dir, _ = toy_results
        out = tmp_path / "again.csv"
        write_consolidated_csv(results_dir, out)
        assert out.read_bytes() == (results_dir / "consolidated.csv").read_bytes()

    def test_record_files_follow_layout(self, toy_results):
        results_dir, records = toy_results
        for scenario in ("S1", "S2"):
            path = results_dir / scenario / "n400" / "rate-0.02" / "0000.json"
            assert path.exists()
            rec = json.loads(path.read_text())
            assert rec["scenario"] == scenario
