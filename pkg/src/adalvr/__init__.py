"""Adaptive preconditioning with loopless variance-reduced gradient
estimators for finite-sum convex optimization."""

from .problems import (
    Dataset,
    DatasetFormatError,
    FiniteSumProblem,
    LeastSquaresProblem,
    MultinomialLogisticProblem,
    load_csv,
    make_classification_data,
    make_problem,
    make_regression_data,
    minmax_scale,
    train_test_split,
)
from .scaling import Domain, ScalingState, make_scaling, mahalanobis_norm_sq
from .estimators import GradientEstimator, make_estimator
from .optimizer import (
    ConvergenceError,
    OptimizerConfig,
    RateFit,
    RunTrace,
    rate_fit,
    reference_solution,
    run,
)
from .verify import (
    LemmaReport,
    check_grad_subopt,
    check_regret_bound,
    check_trace_bounds,
    check_weighted_distance,
    quad_root_bound,
    run_verification_suite,
)
from .bench import (
    ALGORITHMS,
    GridSpec,
    ResultRow,
    balanced_accuracy,
    emit_csv,
    parse_csv,
    predict,
    prepare_problem,
    rows_to_csv,
    run_grid,
)

__version__ = "0.1.0"
