"""Hinge regression trees: oblique regression trees whose splits are fitted
as max/min hinges of two affine models by damped Newton iterations."""

from .config import AutoStep, FixedStep, HrtConfig, parse_step
# the train/test split function lives at hrt.datasets.split; hrt.split is the node optimizer module
from .datasets import SplitSpec, SyntheticFunction, SyntheticSpec, generate, load_csv, to_csv
from .evaluation import (
    AblationRow,
    ClassificationMetrics,
    CsvSource,
    ExperimentSpec,
    RegressionMetrics,
    ablate,
    auc_score,
    classification_metrics,
    regression_metrics,
    run_experiment,
)
from .linalg import DesignMatrix, augment, solve_ridge
from .split import (
    HingeKind,
    Partition,
    SplitOutcome,
    SplitParams,
    fallback_split,
    find_optimal_split,
    initialize_params,
    select_split,
)
from .tree import FitReport, HrtModel, Internal, Leaf, fit, load, predict, predict_class, save

__version__ = "0.1.0"
