"""Benchmark simulator for anomaly detection under extreme class imbalance.

Synthetic two-class distributions with exact densities, a Bayes-optimal
reference scorer, natively implemented detectors behind one fit/score
interface, a seeded Monte-Carlo pipeline with cross-validated tuning, and
aggregation into rank / generalization reports.
"""

from .synth import (
    InvalidScenarioError,
    IsotropicGaussianMixture,
    LabeledDataset,
    ScenarioSpec,
    TvSDistribution,
    build_tvs,
    sample,
)
from .metrics import (
    EmptySampleError,
    ScoreSet,
    ThresholdReport,
    aucroc,
    empirical_quantile,
    fnr_at_threshold,
    fpr_at_threshold,
    mse,
    threshold_for_fpr,
    threshold_report,
    tradeoff_curve,
)
from .oracle import GroundTruthMetrics, estimate_gt_metrics, gt_score
from .detectors import DetectorSpec, FitError, FittedDetector, Standardizer, default_suite, fit
from .tuning import (
    DetectorFailedError,
    FoldPlan,
    InsufficientAnomaliesError,
    ValidationResult,
    grid_search,
    plan_folds,
)
from .pipeline import (
    SimulationConfig,
    SimulationRecord,
    load_records,
    run_experiment,
    run_simulation,
    write_consolidated_csv,
)
from .analysis import (
    CriticalDifferenceResult,
    GeneralizationReport,
    PredictionBounds,
    RankTable,
    category_max,
    critical_difference,
    generalization_bounds,
    mann_whitney_u,
    rank_detectors,
    significance,
)
from .config import (
    ConfigError,
    ExperimentConfig,
    PRESET_SCENARIOS,
    default_experiment_config,
    dump_config,
    load_config,
    preset_scenario,
)

__version__ = "0.1.0"
