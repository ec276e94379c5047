"""Benchmark harness: algorithm x step-parameter grid sweeps to CSV.

Each grid cell runs one algorithm at one value of the step parameter
L-tilde for a fixed budget of component-gradient evaluations.  The step
parameter maps to the hyperparameter as eta = 1 / L-tilde for every
algorithm, adaptive or not, so all methods share one grid.  Metrics are
the train objective and (for classification) the balanced accuracy on the
held-out split, reported against the number of computed gradients.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .optimizer import OptimizerConfig, run
from .problems import (
    Dataset,
    FiniteSumProblem,
    load_csv,
    make_classification_data,
    make_problem,
    make_regression_data,
    minmax_scale,
    train_test_split,
)
from .scaling import Domain

# algorithm name -> (estimator kind, scaling kind)
ALGORITHMS: dict[str, tuple[str, str]] = {
    "gd": ("full_batch", "constant"),
    "sgd": ("sgd", "constant"),
    "saga": ("saga", "constant"),
    "lsvrg": ("lsvrg", "constant"),
    "adagrad_norm": ("sgd", "adagrad_norm"),
    "adagrad_diag": ("sgd", "adagrad_diag"),
    "adasaga_norm": ("saga", "adagrad_norm"),
    "adasaga_diag": ("saga", "adagrad_diag"),
    "adalsvrg_norm": ("lsvrg", "adagrad_norm"),
    "adalsvrg_diag": ("lsvrg", "adagrad_diag"),
    "rmsprop": ("sgd", "rmsprop"),
    "rmsprop_saga": ("saga", "rmsprop"),
    "rmsprop_lsvrg": ("lsvrg", "rmsprop"),
    "adam": ("sgd", "adam"),
    "adam_saga": ("saga", "adam"),
    "adam_lsvrg": ("lsvrg", "adam"),
}

CSV_HEADER = "algorithm,ltilde,seed,gradients,epoch,train_objective,balanced_accuracy,diverged"


@dataclass
class GridSpec:
    algorithms: list[str]
    ltilde_grid: list[float]
    epochs: float
    seeds: list[int] = field(default_factory=lambda: [0])
    p: float | None = None
    projection: bool = False
    box_halfwidth: float | None = None
    checkpoint_grads: int | None = None
    gamma: float = 0.9
    beta1: float = 0.9
    beta2: float = 0.999
    workers: int = 1

    def __post_init__(self):
        if not self.algorithms or not self.ltilde_grid or not self.seeds:
            raise ValueError("algorithms, ltilde_grid and seeds must be nonempty")
        unknown = [a for a in self.algorithms if a not in ALGORITHMS]
        if unknown:
            raise ValueError(f"unknown algorithms: {unknown}")
        if self.epochs <= 0:
            raise ValueError("epochs must be positive")
        if any(lt <= 0 for lt in self.ltilde_grid):
            raise ValueError("step parameters must be positive")
        if self.projection and self.box_halfwidth is None:
            raise ValueError("projection requires box_halfwidth")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass
class ResultRow:
    algorithm: str
    ltilde: float
    seed: int
    gradients: int
    epoch: float
    train_objective: float
    balanced_accuracy: float | None
    diverged: bool


def predict(problem: FiniteSumProblem, x, features) -> np.ndarray:
    """Argmax class scores per sample; ties resolve to the lowest index."""
    if problem.kind != "logistic":
        raise ValueError("predictions are only defined for the logistic problem")
    x = np.asarray(x, dtype=np.float64)
    W = x.reshape(problem.n_classes, -1)
    return np.argmax(np.asarray(features) @ W.T, axis=1)


def balanced_accuracy(predictions, labels, n_classes: int) -> float:
    """Mean per-class recall over the classes present in the labels."""
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.shape != labels.shape or predictions.size == 0:
        raise ValueError("predictions and labels must be nonempty and equal-length")
    recalls = []
    for k in range(n_classes):
        mask = labels == k
        if mask.any():
            recalls.append(float(np.mean(predictions[mask] == k)))
    return float(np.mean(recalls))


def _plan(estimator: str, n: int, budget: int, p: float | None) -> tuple[int, float]:
    """Choose T so the run's fresh-gradient total meets the budget.

    Returns (T, expected gradients per step).  Counting: saga pays n at
    initialization then 1 per step; lsvrg pays n then 2 + p*n expected per
    step; sgd 1 per step; full batch n per step.  At least one update step
    runs even when the budget does not cover initialization.
    """
    if estimator == "saga":
        init, per = n, 1.0
    elif estimator == "lsvrg":
        p_eff = p if p is not None else (1.0 / n if n > 1 else 0.5)
        init, per = n, 2.0 + p_eff * n
    elif estimator == "sgd":
        init, per = 0, 1.0
    elif estimator == "full_batch":
        init, per = 0, float(n)
    else:
        raise ValueError(f"unknown estimator kind {estimator!r}")
    steps = max(1, int(round((budget - init) / per)))
    return 1 + steps, per


def _run_cell(
    spec: GridSpec,
    problem: FiniteSumProblem,
    test_data: Dataset | None,
    algorithm: str,
    ltilde: float,
    seed: int,
) -> list[ResultRow]:
    est_kind, sc_kind = ALGORITHMS[algorithm]
    n = problem.n_components
    budget = int(round(spec.epochs * n))
    T, _ = _plan(est_kind, n, budget, spec.p)
    stride_grads = spec.checkpoint_grads if spec.checkpoint_grads is not None else n
    domain = Domain.unconstrained()
    if spec.projection:
        domain = Domain.centered_box(np.zeros(problem.d), spec.box_halfwidth)
    config = OptimizerConfig(
        estimator=est_kind,
        scaling=sc_kind,
        eta=1.0 / ltilde,
        T=T,
        seed=seed,
        p=spec.p,
        domain=domain,
        projection=spec.projection,
        checkpoint_grads=stride_grads,
        gamma=spec.gamma,
        beta1=spec.beta1,
        beta2=spec.beta2,
    )
    accuracies: dict[int, float] = {}
    callback = None
    if problem.kind == "logistic" and test_data is not None:

        def callback(t, grads, x):
            preds = predict(problem, x, test_data.features)
            accuracies[t] = balanced_accuracy(preds, test_data.labels, problem.n_classes)

    trace = run(config, problem, np.zeros(problem.d), checkpoint_callback=callback)
    rows = []
    for k in range(trace.steps.size):
        t = int(trace.steps[k])
        grads = int(trace.gradient_counts[k])
        rows.append(
            ResultRow(
                algorithm=algorithm,
                ltilde=ltilde,
                seed=seed,
                gradients=grads,
                epoch=grads / n,
                train_objective=float(trace.objective[k]),
                balanced_accuracy=accuracies.get(t),
                diverged=False,
            )
        )
    if trace.diverged:
        last_obj = float(trace.objective[-1]) if trace.steps.size else trace.first_objective
        rows.append(
            ResultRow(
                algorithm=algorithm,
                ltilde=ltilde,
                seed=seed,
                gradients=trace.gradient_count,
                epoch=trace.gradient_count / n,
                train_objective=last_obj,
                balanced_accuracy=None,
                diverged=True,
            )
        )
    return rows


def run_grid(
    spec: GridSpec, problem: FiniteSumProblem, test_data: Dataset | None = None
) -> list[ResultRow]:
    """Run every (algorithm, ltilde, seed) cell; rows come back in canonical
    cell order regardless of scheduling.  Diverged cells keep their finite
    checkpoints and end with a single flagged row."""
    cells = [
        (algo, lt, seed)
        for algo in spec.algorithms
        for lt in spec.ltilde_grid
        for seed in spec.seeds
    ]
    if spec.workers > 1:
        with ThreadPoolExecutor(max_workers=spec.workers) as pool:
            chunks = list(
                pool.map(lambda c: _run_cell(spec, problem, test_data, *c), cells)
            )
    else:
        chunks = [_run_cell(spec, problem, test_data, *cell) for cell in cells]
    return [row for chunk in chunks for row in chunk]


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def rows_to_csv(rows: list[ResultRow]) -> str:
    lines = [CSV_HEADER]
    for r in rows:
        ba = "" if r.balanced_accuracy is None else _fmt(r.balanced_accuracy)
        lines.append(
            f"{r.algorithm},{_fmt(r.ltilde)},{r.seed},{r.gradients},{_fmt(r.epoch)},"
            f"{_fmt(r.train_objective)},{ba},{'true' if r.diverged else 'false'}"
        )
    return "\n".join(lines) + "\n"


def emit_csv(rows: list[ResultRow], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(rows_to_csv(rows))


def parse_csv(text: str) -> list[ResultRow]:
    lines = text.strip().split("\n")
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError("unexpected CSV header")
    rows = []
    for line in lines[1:]:
        parts = line.split(",")
        if len(parts) != 8:
            raise ValueError(f"expected 8 columns, got {len(parts)}")
        rows.append(
            ResultRow(
                algorithm=parts[0],
                ltilde=float(parts[1]),
                seed=int(parts[2]),
                gradients=int(parts[3]),
                epoch=float(parts[4]),
                train_objective=float(parts[5]),
                balanced_accuracy=None if parts[6] == "" else float(parts[6]),
                diverged=parts[7] == "true",
            )
        )
    return rows


def prepare_problem(
    problem: str = "logistic",
    dataset: str = "synthetic",
    has_header: bool = False,
    n_samples: int = 2000,
    n_features: int = 20,
    n_classes: int = 5,
    label_noise: float = 0.1,
    data_seed: int = 0,
    batch: int = 10,
    minmax: bool = True,
    train_fraction: float = 0.8,
    split_seed: int = 0,
    subsample: int | None = None,
) -> tuple[FiniteSumProblem, Dataset]:
    """Build the train problem and held-out test split from a dataset source.

    ``dataset`` is either "synthetic" (seeded generator) or a CSV path;
    ``subsample`` keeps only the first rows of a file, for desk-scale runs
    on large datasets.
    """
    if dataset == "synthetic":
        if problem == "logistic":
            ds, _ = make_classification_data(
                n_samples, n_features, n_classes, seed=data_seed, label_noise=label_noise
            )
        else:
            ds, _ = make_regression_data(n_samples, n_features, seed=data_seed)
    else:
        ds = load_csv(dataset, task=problem, has_header=has_header)
        if subsample is not None:
            keep = min(subsample, ds.n_samples)
            ds = Dataset(ds.features[:keep], ds.labels[:keep], ds.n_classes)
    if minmax:
        ds = minmax_scale(ds)
    train, test = train_test_split(ds, train_fraction, split_seed)
    return make_problem(problem, train, batch), test
