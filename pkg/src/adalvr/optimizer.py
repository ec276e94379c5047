"""Projected preconditioned runs: estimator + scaling + running average.

One update step samples the estimator, folds the estimate into the scaling
accumulator, then moves against the preconditioned direction and projects
back onto the feasible set.  The returned trace records per-checkpoint
metrics and, on request, the full iterate/gradient histories needed by the
verification checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from .estimators import make_estimator
from .problems import FiniteSumProblem, MultinomialLogisticProblem
from .scaling import SCALING_KINDS, Domain, make_scaling


class ConvergenceError(RuntimeError):
    """Reference solve did not reach the requested gradient tolerance."""


@dataclass
class OptimizerConfig:
    estimator: str
    scaling: str
    eta: float
    T: int
    seed: int = 0
    p: float | None = None
    domain: Domain = field(default_factory=Domain.unconstrained)
    projection: bool = False
    checkpoint_stride: int = 1
    checkpoint_grads: int | None = None
    record_history: bool = False
    gamma: float = 0.9
    beta1: float = 0.9
    beta2: float = 0.999

    def __post_init__(self):
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if self.eta <= 0:
            raise ValueError("eta must be positive")
        if self.checkpoint_stride < 1:
            raise ValueError("checkpoint_stride must be >= 1")
        if self.checkpoint_grads is not None and self.checkpoint_grads < 1:
            raise ValueError("checkpoint_grads must be >= 1")
        if self.p is not None and not 0.0 < self.p < 1.0:
            raise ValueError("p must lie in (0, 1)")
        if self.scaling not in SCALING_KINDS:
            raise ValueError(f"unknown scaling kind {self.scaling!r}")
        if self.projection and not self.domain.is_box:
            raise ValueError("projection requires a box domain")


@dataclass
class RunTrace:
    """Per-checkpoint record of a single run.

    ``steps[k]`` is the iteration t at which checkpoint k was taken, with
    ``objective`` = f(x^(t)), ``avg_objective`` = f of the running average
    over x^(1..t), ``grad_norm_sq`` = ||g^(t)||^2 and ``root_trace`` =
    Tr(A_t).  ``iterates`` (x^(1), x^(2), ...) and ``gradients`` (g^(1),
    g^(2), ...) are kept only when history recording is on.
    """

    estimator: str
    scaling: str
    eta: float
    seed: int
    T: int
    d: int
    n_components: int
    projection: bool
    steps: np.ndarray
    gradient_counts: np.ndarray
    objective: np.ndarray
    avg_objective: np.ndarray
    grad_norm_sq: np.ndarray
    root_trace: np.ndarray
    x_avg: np.ndarray
    x_final: np.ndarray
    first_objective: float
    final_avg_objective: float
    gradient_count: int
    diverged: bool = False
    refresh_count: int = 0
    iterates: np.ndarray | None = None
    gradients: np.ndarray | None = None

    @property
    def alpha(self) -> float:
        """Scaled-norm constant: 1 for the scalar kind, sqrt(d) for diagonal."""
        return 1.0 if self.scaling == "adagrad_norm" else math.sqrt(self.d)


def run(config: OptimizerConfig, problem: FiniteSumProblem, x1, checkpoint_callback=None) -> RunTrace:
    """Execute T - 1 update steps from x1 and return the recorded trace.

    Checkpoints fall every ``checkpoint_stride`` iterations, or, when
    ``checkpoint_grads`` is set, at each crossing of the next multiple of
    that many fresh gradient evaluations; the final step is always
    recorded.  A non-finite estimate, iterate or objective stops the run
    early and marks the trace diverged, keeping everything recorded up to
    the last finite checkpoint.
    """
    x = np.asarray(x1, dtype=np.float64).copy()
    if x.shape != (problem.d,):
        raise ValueError(f"x1 must have length {problem.d}")
    if config.projection:
        x = config.domain.project(x)

    est = make_estimator(config.estimator, problem, x, p=config.p, seed=config.seed)
    sc = make_scaling(
        config.scaling, problem.d, config.eta, config.gamma, config.beta1, config.beta2
    )
    avg = x.copy()
    first_objective = problem.value(x)

    steps: list[int] = []
    counts: list[int] = []
    f_x: list[float] = []
    f_avg: list[float] = []
    gsq: list[float] = []
    roots: list[float] = []
    xs = [x.copy()] if config.record_history else None
    gs: list[np.ndarray] | None = [] if config.record_history else None
    diverged = False

    grad_anchor = config.checkpoint_grads
    next_threshold = grad_anchor if grad_anchor is not None else 0

    # overflow during a blown-up run is a divergence signal, not an error
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(1, config.T):
            g = est.estimate(x)
            if not np.isfinite(g).all():
                diverged = True
                break
            sc.accumulate(g)
            if gs is not None:
                gs.append(g)
            if grad_anchor is not None:
                take = est.gradient_count >= next_threshold or t == config.T - 1
                if est.gradient_count >= next_threshold:
                    next_threshold = grad_anchor * (est.gradient_count // grad_anchor + 1)
            else:
                take = t % config.checkpoint_stride == 0 or t == config.T - 1
            if take:
                fx = problem.value(x)
                fa = problem.value(avg)
                if not (math.isfinite(fx) and math.isfinite(fa)):
                    diverged = True
                    break
                steps.append(t)
                counts.append(est.gradient_count)
                f_x.append(fx)
                f_avg.append(fa)
                gsq.append(float(g @ g))
                roots.append(sc.trace_root())
                if checkpoint_callback is not None:
                    checkpoint_callback(t, est.gradient_count, x)
            x = x - config.eta * sc.direction(g)
            if config.projection:
                x = config.domain.project(x)
            if not np.isfinite(x).all():
                diverged = True
                break
            avg = avg + (x - avg) / (t + 1)
            if xs is not None:
                xs.append(x.copy())

        final_avg = problem.value(avg)
    if not math.isfinite(final_avg):
        diverged = True
        final_avg = math.nan

    return RunTrace(
        estimator=config.estimator,
        scaling=config.scaling,
        eta=config.eta,
        seed=config.seed,
        T=config.T,
        d=problem.d,
        n_components=problem.n_components,
        projection=config.projection,
        steps=np.asarray(steps, dtype=np.int64),
        gradient_counts=np.asarray(counts, dtype=np.int64),
        objective=np.asarray(f_x),
        avg_objective=np.asarray(f_avg),
        grad_norm_sq=np.asarray(gsq),
        root_trace=np.asarray(roots),
        x_avg=avg,
        x_final=x,
        first_objective=first_objective,
        final_avg_objective=final_avg,
        gradient_count=est.gradient_count,
        diverged=diverged,
        refresh_count=getattr(est, "refresh_count", 0),
        iterates=np.asarray(xs) if xs is not None else None,
        gradients=np.asarray(gs) if gs is not None else None,
    )


def _logistic_hessian_dense(problem: MultinomialLogisticProblem, x: np.ndarray) -> np.ndarray:
    """Dense Hessian sum_s w_s (diag(p_s) - p_s p_s^T) kron (a_s a_s^T)."""
    X = problem.dataset.features
    w = problem._sample_weights
    P = problem._softmax(X @ problem._weights(x).T)
    K = P.shape[1]
    p = X.shape[1]
    WP = w[:, None] * P
    # diag block contribution: sum_s w_s p_sk a_s a_s^T on block (k, k)
    H = np.zeros((K * p, K * p))
    for k in range(K):
        Hkk = X.T @ (WP[:, k][:, None] * X)
        H[k * p : (k + 1) * p, k * p : (k + 1) * p] += Hkk
    # rank-one correction: - sum_s w_s (p_sk a_s)(p_sl a_s)^T on block (k, l)
    for k in range(K):
        Ak = P[:, k][:, None] * X
        for l in range(K):
            Al = (w * P[:, l])[:, None] * X
            H[k * p : (k + 1) * p, l * p : (l + 1) * p] -= Ak.T @ Al
    return H


def reference_solution(
    problem: FiniteSumProblem, tol: float = 1e-9, max_iter: int = 5000
) -> tuple[np.ndarray, float]:
    """High-accuracy minimizer and optimal value.

    Least squares is solved in closed form through the normal equations.
    Logistic runs a quasi-Newton solve followed by damped Newton polish
    until ||grad f|| <= tol; if the tolerance is not reached (for example
    on separable data, where the infimum is not attained) a
    :class:`ConvergenceError` reports the final gradient norm.
    """
    if problem.kind == "ls":
        X = problem.dataset.features
        b = problem.dataset.labels
        w = problem._sample_weights
        H = X.T @ (w[:, None] * X)
        q = X.T @ (w * b)
        x_star = np.linalg.lstsq(H, q, rcond=None)[0]
        return x_star, problem.value(x_star)

    x0 = np.zeros(problem.d)
    res = scipy.optimize.minimize(
        lambda v: (problem.value(v), problem.full_grad(v)),
        x0,
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": max_iter, "maxfun": 10 * max_iter, "gtol": 1e-12, "ftol": 1e-17},
    )
    x_star = res.x
    # Newton polish, line-searched on the gradient norm: the objective
    # stagnates at float precision long before the gradient does
    for _ in range(100):
        grad = problem.full_grad(x_star)
        gnorm = float(np.linalg.norm(grad))
        if gnorm <= tol:
            return x_star, problem.value(x_star)
        H = _logistic_hessian_dense(problem, x_star)
        step = np.linalg.lstsq(H, grad, rcond=None)[0]
        scale = 1.0
        improved = False
        while scale > 1e-14:
            cand = x_star - scale * step
            if float(np.linalg.norm(problem.full_grad(cand))) < gnorm:
                x_star = cand
                improved = True
                break
            scale *= 0.5
        if not improved:
            break
    gnorm = float(np.linalg.norm(problem.full_grad(x_star)))
    if gnorm > tol:
        raise ConvergenceError(
            f"reference solve stopped with ||grad f|| = {gnorm:.3e} > tol = {tol:.3e}"
        )
    return x_star, problem.value(x_star)


@dataclass
class RateFit:
    constant: float
    slope: float


def rate_fit(traces, f_star: float) -> RateFit:
    """Fit gap(t) ~ C * t^slope on the tail half of the checkpoints.

    ``traces`` is one trace or a list sharing identical checkpoint steps;
    gaps f(avg iterate) - f_star are averaged across traces before fitting
    log-gap against log-t.  Nonpositive gaps are excluded.
    """
    if isinstance(traces, RunTrace):
        traces = [traces]
    if not traces:
        raise ValueError("need at least one trace")
    steps = traces[0].steps
    for tr in traces[1:]:
        if not np.array_equal(tr.steps, steps):
            raise ValueError("traces must share checkpoint steps")
    if steps.size < 4:
        raise ValueError("need at least four checkpoints to fit a rate")
    gaps = np.mean([tr.avg_objective for tr in traces], axis=0) - f_star
    tail = slice(steps.size // 2, None)
    t_tail = steps[tail].astype(np.float64)
    g_tail = gaps[tail]
    keep = g_tail > 0
    if keep.sum() < 2:
        raise ValueError("not enough positive gap values in the tail to fit a rate")
    slope, intercept = np.polyfit(np.log(t_tail[keep]), np.log(g_tail[keep]), 1)
    return RateFit(constant=float(np.exp(intercept)), slope=float(slope))
