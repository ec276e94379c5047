"""Finite-sum objectives over fixed mini-batch groups.

A problem is f(x) = (1/n) * sum_i f_i(x) where each component f_i is the
average loss over one fixed, contiguous group of samples.  Two losses are
implemented: multinomial logistic regression (no regularization) and least
squares.  Both expose component gradients, the exact full gradient, Bregman
divergences and a closed-form upper bound on the component smoothness
constant.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .prng import make_rng


class DatasetFormatError(ValueError):
    """Raised when a CSV dataset file cannot be parsed."""


@dataclass
class Dataset:
    """Dense feature matrix with integer class labels or real targets.

    ``n_classes`` is None for regression targets; otherwise labels must be
    integers in ``[0, n_classes)``.
    """

    features: np.ndarray
    labels: np.ndarray
    n_classes: int | None = None

    def __post_init__(self):
        self.features = np.ascontiguousarray(self.features, dtype=np.float64)
        if self.features.ndim != 2:
            raise ValueError("features must be a 2-d array")
        n = self.features.shape[0]
        if n < 1 or self.features.shape[1] < 1:
            raise ValueError("dataset needs at least one sample and one feature")
        if not np.isfinite(self.features).all():
            raise ValueError("features contain non-finite values")
        if self.n_classes is None:
            self.labels = np.asarray(self.labels, dtype=np.float64)
            if not np.isfinite(self.labels).all():
                raise ValueError("regression targets contain non-finite values")
        else:
            labels = np.asarray(self.labels)
            if labels.size and not np.array_equal(labels, labels.astype(np.int64)):
                raise ValueError("class labels must be integers")
            self.labels = labels.astype(np.int64)
            if self.n_classes < 2:
                raise ValueError("need at least two classes")
            if self.labels.min() < 0 or self.labels.max() >= self.n_classes:
                raise ValueError("class labels must lie in [0, n_classes)")
        if self.labels.shape != (n,):
            raise ValueError("labels must be one per sample")

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]


def load_csv(path: str, task: str = "logistic", has_header: bool = False) -> Dataset:
    """Load a dataset from CSV: numeric columns, the last one is the label.

    ``task`` is "logistic" (integer class labels) or "ls" (real targets).
    Raises :class:`DatasetFormatError` with the offending line number on
    malformed input.
    """
    if task not in ("logistic", "ls"):
        raise ValueError(f"unknown task {task!r}")
    rows: list[list[float]] = []
    line_numbers: list[int] = []
    width = None
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if has_header and lineno == 1:
                continue
            if not row or all(cell.strip() == "" for cell in row):
                continue
            if width is None:
                width = len(row)
                if width < 2:
                    raise DatasetFormatError(
                        f"line {lineno}: need at least one feature column and a label"
                    )
            elif len(row) != width:
                raise DatasetFormatError(
                    f"line {lineno}: expected {width} columns, found {len(row)}"
                )
            try:
                rows.append([float(cell) for cell in row])
            except ValueError:
                raise DatasetFormatError(f"line {lineno}: non-numeric cell") from None
            line_numbers.append(lineno)
    if not rows:
        raise DatasetFormatError(f"{path}: no data rows")
    arr = np.asarray(rows, dtype=np.float64)
    feats, lab = arr[:, :-1], arr[:, -1]
    if task == "ls":
        return Dataset(feats, lab, None)
    rounded = np.round(lab)
    if not np.array_equal(lab, rounded):
        bad = line_numbers[int(np.argmax(lab != rounded))]
        raise DatasetFormatError(f"line {bad}: class label is not an integer")
    if lab.min() < 0:
        bad = line_numbers[int(np.argmax(lab < 0))]
        raise DatasetFormatError(f"line {bad}: negative class label")
    return Dataset(feats, lab.astype(np.int64), int(lab.max()) + 1)


def minmax_scale(dataset: Dataset) -> Dataset:
    """Affinely map each feature column onto [0, 1]; constant columns map to 0."""
    X = dataset.features
    lo = X.min(axis=0)
    span = X.max(axis=0) - lo
    scaled = np.zeros_like(X)
    ok = span > 0
    scaled[:, ok] = (X[:, ok] - lo[ok]) / span[ok]
    return Dataset(scaled, dataset.labels.copy(), dataset.n_classes)


def train_test_split(dataset: Dataset, train_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Disjoint split into ceil(fraction*n) train samples and the rest."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie strictly between 0 and 1")
    n = dataset.n_samples
    n_train = math.ceil(train_fraction * n)
    if n_train >= n:
        raise ValueError("train_fraction leaves no test samples")
    perm = make_rng(seed).permutation(n)
    idx_train = np.sort(perm[:n_train])
    idx_test = np.sort(perm[n_train:])
    return (
        Dataset(dataset.features[idx_train], dataset.labels[idx_train], dataset.n_classes),
        Dataset(dataset.features[idx_test], dataset.labels[idx_test], dataset.n_classes),
    )


def make_classification_data(
    n_samples: int,
    n_features: int,
    n_classes: int,
    seed: int,
    label_noise: float = 0.1,
    feature_scales=None,
) -> tuple[Dataset, np.ndarray]:
    """Seeded synthetic multiclass data with a planted linear parameter.

    Features are uniform on [0, 1], optionally stretched per feature to
    control conditioning.  The planted parameter is adjusted so every class
    scores equally at the mean feature vector, which keeps the argmax
    labels roughly balanced; a ``label_noise`` fraction is then resampled
    uniformly.  Returns the dataset and the planted parameter, flattened
    class-major.
    """
    rng = make_rng(seed)
    X = rng.uniform(size=(n_samples, n_features))
    if feature_scales is not None:
        scales = np.asarray(feature_scales, dtype=np.float64)
        if scales.shape != (n_features,):
            raise ValueError("feature_scales must have one entry per feature")
        X = X * scales
    W = rng.normal(size=(n_classes, n_features))
    center = X.mean(axis=0)
    scores = W @ center
    W = W - np.outer(scores - scores.mean(), center) / float(center @ center)
    labels = np.argmax(X @ W.T, axis=1)
    if label_noise > 0:
        flip = rng.random(n_samples) < label_noise
        labels = labels.copy()
        labels[flip] = rng.integers(0, n_classes, size=int(flip.sum()))
    return Dataset(X, labels, n_classes), W.ravel()


def make_regression_data(
    n_samples: int,
    n_features: int,
    seed: int,
    noise: float = 0.1,
    feature_scales=None,
) -> tuple[Dataset, np.ndarray]:
    """Seeded synthetic least-squares data with a planted parameter."""
    rng = make_rng(seed)
    X = rng.uniform(size=(n_samples, n_features))
    if feature_scales is not None:
        scales = np.asarray(feature_scales, dtype=np.float64)
        if scales.shape != (n_features,):
            raise ValueError("feature_scales must have one entry per feature")
        X = X * scales
    w = rng.normal(size=n_features)
    targets = X @ w + noise * rng.normal(size=n_samples)
    return Dataset(X, targets, None), w


class FiniteSumProblem:
    """Base class: fixed partition of samples into contiguous components."""

    kind: str = ""

    def __init__(self, dataset: Dataset, batch_size: int = 1):
        if batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        self.dataset = dataset
        n = dataset.n_samples
        self.n_components = -(-n // batch_size)
        sizes = np.full(self.n_components, n // self.n_components, dtype=np.int64)
        sizes[: n % self.n_components] += 1
        self._starts = np.concatenate(([0], np.cumsum(sizes)))
        self._sizes = sizes
        # weight of each sample inside (1/n) sum_i mean-over-group_i
        self._sample_weights = np.repeat(1.0 / (self.n_components * sizes), sizes)
        self._smoothness: float | None = None

    @property
    def d(self) -> int:
        raise NotImplementedError

    def _check_x(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.d,):
            raise ValueError(f"expected parameter vector of length {self.d}, got shape {x.shape}")
        return x

    def _component_slice(self, i: int) -> slice:
        if not 0 <= i < self.n_components:
            raise IndexError(f"component index {i} out of range [0, {self.n_components})")
        return slice(int(self._starts[i]), int(self._starts[i + 1]))

    def _sample_losses(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def value(self, x) -> float:
        """f(x) = (1/n) sum_i f_i(x), each f_i the mean loss over its group."""
        losses = self._sample_losses(self._check_x(x))
        comp = np.add.reduceat(losses, self._starts[:-1]) / self._sizes
        return float(comp.mean())

    def component_value(self, i: int, x) -> float:
        x = self._check_x(x)
        sl = self._component_slice(i)
        return float(np.mean(self._sample_losses_block(sl, x)))

    def _sample_losses_block(self, sl: slice, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def component_grad(self, i: int, x) -> np.ndarray:
        raise NotImplementedError

    def full_grad(self, x) -> np.ndarray:
        raise NotImplementedError

    def bregman(self, i: int, y, x) -> float:
        """D_{f_i}(y, x) = f_i(y) - f_i(x) - <grad f_i(x), y - x>."""
        y = self._check_x(y)
        x = self._check_x(x)
        return (
            self.component_value(i, y)
            - self.component_value(i, x)
            - float(self.component_grad(i, x) @ (y - x))
        )

    def smoothness_bound(self) -> float:
        """Upper bound on the smoothness constant of every component."""
        if self._smoothness is None:
            sq = np.einsum("ij,ij->i", self.dataset.features, self.dataset.features)
            per_comp = np.add.reduceat(sq, self._starts[:-1]) / self._sizes
            self._smoothness = self._smoothness_from_row_norms(float(per_comp.max()))
        return self._smoothness

    def _smoothness_from_row_norms(self, max_mean_sq: float) -> float:
        raise NotImplementedError


class MultinomialLogisticProblem(FiniteSumProblem):
    """Multinomial logistic regression, parameters flattened class-major.

    The loss of sample (a, y) at parameter W (K x p) is
    logsumexp(W a) - (W a)_y.  The flat parameter has length K*p with class
    k occupying x[k*p:(k+1)*p].
    """

    kind = "logistic"

    def __init__(self, dataset: Dataset, batch_size: int = 1):
        if dataset.n_classes is None:
            raise ValueError("logistic problem needs a classification dataset")
        super().__init__(dataset, batch_size)
        self.n_classes = dataset.n_classes

    @property
    def d(self) -> int:
        return self.n_classes * self.dataset.n_features

    def _weights(self, x: np.ndarray) -> np.ndarray:
        return x.reshape(self.n_classes, self.dataset.n_features)

    def _sample_losses(self, x: np.ndarray) -> np.ndarray:
        Z = self.dataset.features @ self._weights(x).T
        return logsumexp(Z, axis=1) - Z[np.arange(Z.shape[0]), self.dataset.labels]

    def _sample_losses_block(self, sl: slice, x: np.ndarray) -> np.ndarray:
        Z = self.dataset.features[sl] @ self._weights(x).T
        return logsumexp(Z, axis=1) - Z[np.arange(Z.shape[0]), self.dataset.labels[sl]]

    @staticmethod
    def _softmax(Z: np.ndarray) -> np.ndarray:
        Z = Z - Z.max(axis=1, keepdims=True)
        np.exp(Z, out=Z)
        Z /= Z.sum(axis=1, keepdims=True)
        return Z

    def component_grad(self, i: int, x) -> np.ndarray:
        x = self._check_x(x)
        sl = self._component_slice(i)
        Xb = self.dataset.features[sl]
        yb = self.dataset.labels[sl]
        P = self._softmax(Xb @ self._weights(x).T)
        P[np.arange(P.shape[0]), yb] -= 1.0
        return (P.T @ Xb).ravel() / Xb.shape[0]

    def full_grad(self, x) -> np.ndarray:
        x = self._check_x(x)
        X = self.dataset.features
        P = self._softmax(X @ self._weights(x).T)
        P[np.arange(P.shape[0]), self.dataset.labels] -= 1.0
        P *= self._sample_weights[:, None]
        return (P.T @ X).ravel()

    def _smoothness_from_row_norms(self, max_mean_sq: float) -> float:
        # softmax Hessian in the logits is bounded by I/2
        return 0.5 * max_mean_sq


class LeastSquaresProblem(FiniteSumProblem):
    """Least squares: loss of sample (a, b) is (1/2) (<a, x> - b)^2."""

    kind = "ls"

    def __init__(self, dataset: Dataset, batch_size: int = 1):
        if dataset.n_classes is not None:
            raise ValueError("least-squares problem needs regression targets")
        super().__init__(dataset, batch_size)

    @property
    def d(self) -> int:
        return self.dataset.n_features

    def _sample_losses(self, x: np.ndarray) -> np.ndarray:
        r = self.dataset.features @ x - self.dataset.labels
        return 0.5 * r * r

    def _sample_losses_block(self, sl: slice, x: np.ndarray) -> np.ndarray:
        r = self.dataset.features[sl] @ x - self.dataset.labels[sl]
        return 0.5 * r * r

    def component_grad(self, i: int, x) -> np.ndarray:
        x = self._check_x(x)
        sl = self._component_slice(i)
        Xb = self.dataset.features[sl]
        r = Xb @ x - self.dataset.labels[sl]
        return (Xb.T @ r) / Xb.shape[0]

    def full_grad(self, x) -> np.ndarray:
        x = self._check_x(x)
        X = self.dataset.features
        r = X @ x - self.dataset.labels
        return X.T @ (self._sample_weights * r)

    def _smoothness_from_row_norms(self, max_mean_sq: float) -> float:
        return max_mean_sq


PROBLEM_KINDS = {"logistic": MultinomialLogisticProblem, "ls": LeastSquaresProblem}


def make_problem(kind: str, dataset: Dataset, batch_size: int = 1) -> FiniteSumProblem:
    try:
        cls = PROBLEM_KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown problem kind {kind!r}") from None
    return cls(dataset, batch_size)
