import numpy as np
import pytest

from imbalancebench.config import default_experiment_config
from imbalancebench.detectors import default_suite
from imbalancebench.pipeline import load_records, run_experiment, write_consolidated_csv


@pytest.fixture(scope="session")
def toy_results(tmp_path_factory):
    """A small persisted sweep shared by pipeline/analysis/CLI tests.

    Two scenarios, one size, three repetitions, full default suite, reduced
    test batches.  Returns (results_dir, records_as_dicts).
    """
    results_dir = tmp_path_factory.mktemp("toy_results")
    exp = default_experiment_config(
        sizes=(400,),
        anomaly_rates=(0.02,),
        repetitions=3,
        master_seed=20240101,
        output_dir=str(results_dir),
        parallelism=2,
        n_test_batches=4,
        test_batch_size=512,
    )
    list(run_experiment(exp, resume=False))
    write_consolidated_csv(results_dir)
    return results_dir, load_records(results_dir)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: full acceptance-criteria gates (slow)")
