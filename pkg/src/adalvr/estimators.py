"""Stochastic gradient estimators over a finite-sum problem.

All estimators produce, conditionally on the current memory, an unbiased
estimate of the full gradient.  "saga" keeps one stored component gradient
per component (gradients rather than points: equivalent for the estimate
and cheaper); "lsvrg" keeps a single anchor point together with its full
gradient and refreshes it with probability p per step.

Draw order per step is fixed for reproducibility: the component index
first, then (lsvrg only) the refresh coin.  ``gradient_count`` counts fresh
component-gradient evaluations.
"""

from __future__ import annotations

import numpy as np

from .prng import draw_index, make_rng
from .problems import FiniteSumProblem

ENUMERATION_LIMIT = 10_000


class GradientEstimator:
    kind: str = ""

    def __init__(self, problem: FiniteSumProblem, seed: int = 0):
        self.problem = problem
        self.rng = make_rng(seed)
        self.gradient_count = 0

    @property
    def n(self) -> int:
        return self.problem.n_components

    def estimate(self, x: np.ndarray) -> np.ndarray:
        """Draw the estimate for the current step and update any memory."""
        raise NotImplementedError

    def _estimate_for_index(self, i: int, x: np.ndarray) -> np.ndarray:
        """The estimate conditional on drawing index i (no memory update)."""
        raise NotImplementedError

    def _check_enumerable(self) -> None:
        if self.n > ENUMERATION_LIMIT:
            raise ValueError(
                f"enumeration over {self.n} components exceeds the "
                f"{ENUMERATION_LIMIT} limit"
            )

    def expectation(self, x: np.ndarray) -> np.ndarray:
        """Exact conditional expectation of the estimate by enumerating all
        index draws; leaves the memory untouched and counts no gradients."""
        self._check_enumerable()
        acc = np.zeros(self.problem.d)
        for i in range(self.n):
            acc += self._estimate_for_index(i, x)
        return acc / self.n

    def second_moment_stats(self, x: np.ndarray) -> tuple[float, float]:
        """(E||g - E g||^2, E||g||^2) by enumeration over index draws.

        E g equals the full gradient (checked separately), so the first
        entry is also the mean squared deviation from grad f(x); centering
        on the enumeration mean keeps it exactly zero when the estimator is
        deterministic.
        """
        self._check_enumerable()
        estimates = [self._estimate_for_index(i, x) for i in range(self.n)]
        # shifted variance: exact zero when the estimator is deterministic
        shifted = [est - estimates[0] for est in estimates]
        mean_shift = sum(shifted) / self.n
        var = 0.0
        second = 0.0
        for est, dev in zip(estimates, shifted):
            diff = dev - mean_shift
            var += float(diff @ diff)
            second += float(est @ est)
        return var / self.n, second / self.n


class SGDEstimator(GradientEstimator):
    kind = "sgd"

    def _estimate_for_index(self, i, x):
        return self.problem.component_grad(i, x)

    def estimate(self, x):
        i = draw_index(self.rng, self.n)
        self.gradient_count += 1
        return self.problem.component_grad(i, x)


class FullBatchEstimator(GradientEstimator):
    kind = "full_batch"

    def _estimate_for_index(self, i, x):
        return self.problem.full_grad(x)

    def estimate(self, x):
        self.gradient_count += self.n
        return self.problem.full_grad(x)

    def second_moment_stats(self, x):
        full = self.problem.full_grad(x)
        return 0.0, float(full @ full)


class SagaEstimator(GradientEstimator):
    """Table of stored component gradients; the estimate corrects a fresh
    component gradient by its stored counterpart plus the table mean.

    The table mean is maintained incrementally with Kahan-compensated
    updates so it tracks the exact mean over long runs.  ``track_points``
    additionally retains the memory points themselves, for diagnostics.
    """

    kind = "saga"

    def __init__(self, problem, x1, seed: int = 0, track_points: bool = False):
        super().__init__(problem, seed)
        x1 = np.asarray(x1, dtype=np.float64)
        self.table = np.empty((self.n, problem.d))
        for i in range(self.n):
            self.table[i] = problem.component_grad(i, x1)
        self.gradient_count += self.n
        self._sum = self.table.sum(axis=0)
        self._comp = np.zeros(problem.d)
        self.points = np.tile(x1, (self.n, 1)) if track_points else None

    def table_mean(self) -> np.ndarray:
        return self._sum / self.n

    def _kahan_add(self, delta: np.ndarray) -> None:
        y = delta - self._comp
        t = self._sum + y
        self._comp = (t - self._sum) - y
        self._sum = t

    def _estimate_for_index(self, i, x):
        return self.problem.component_grad(i, x) - self.table[i] + self._sum / self.n

    def estimate(self, x):
        i = draw_index(self.rng, self.n)
        fresh = self.problem.component_grad(i, x)
        self.gradient_count += 1
        g = fresh - self.table[i] + self._sum / self.n
        self._kahan_add(fresh - self.table[i])
        self.table[i] = fresh
        if self.points is not None:
            self.points[i] = x
        return g


class LsvrgEstimator(GradientEstimator):
    """Anchor point plus its full gradient; each step computes two fresh
    component gradients, then re-anchors at the current point with
    probability p (keeping the old anchor otherwise)."""

    kind = "lsvrg"

    def __init__(self, problem, x1, p: float, seed: int = 0):
        if not 0.0 < p < 1.0:
            raise ValueError("refresh probability p must lie in (0, 1)")
        super().__init__(problem, seed)
        self.p = p
        self.anchor = np.asarray(x1, dtype=np.float64).copy()
        self.anchor_grad = problem.full_grad(self.anchor)
        self.gradient_count += self.n
        self.refresh_count = 0

    def _estimate_for_index(self, i, x):
        return (
            self.problem.component_grad(i, x)
            - self.problem.component_grad(i, self.anchor)
            + self.anchor_grad
        )

    def estimate(self, x):
        i = draw_index(self.rng, self.n)
        g = (
            self.problem.component_grad(i, x)
            - self.problem.component_grad(i, self.anchor)
            + self.anchor_grad
        )
        self.gradient_count += 2
        if self.rng.random() < self.p:
            self.anchor = np.asarray(x, dtype=np.float64).copy()
            self.anchor_grad = self.problem.full_grad(self.anchor)
            self.gradient_count += self.n
            self.refresh_count += 1
        return g


ESTIMATOR_KINDS = ("sgd", "full_batch", "saga", "lsvrg")


def make_estimator(
    kind: str,
    problem: FiniteSumProblem,
    x1,
    p: float | None = None,
    seed: int = 0,
    track_points: bool = False,
) -> GradientEstimator:
    if kind == "sgd":
        return SGDEstimator(problem, seed)
    if kind == "full_batch":
        return FullBatchEstimator(problem, seed)
    if kind == "saga":
        return SagaEstimator(problem, x1, seed, track_points=track_points)
    if kind == "lsvrg":
        if p is None:
            # default refresh probability 1/n, kept inside (0, 1) when n = 1
            n = problem.n_components
            p = 1.0 / n if n > 1 else 0.5
        return LsvrgEstimator(problem, x1, p, seed)
    raise ValueError(f"unknown estimator kind {kind!r}")
