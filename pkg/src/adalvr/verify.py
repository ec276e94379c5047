"""Executable oracles for the regret and trace inequalities.

Every check recomputes the cumulative preconditioner roots directly from
the recorded gradient history (independent of the scaling code path used
during the run), evaluates both sides of the inequality with compensated
summation, and reports the slack.  A report passes iff
slack >= -tolerance * (1 + |rhs|).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .optimizer import RunTrace, reference_solution, run, OptimizerConfig
from .prng import make_rng
from .problems import FiniteSumProblem, make_classification_data, make_regression_data, make_problem
from .scaling import Domain

DEFAULT_TOLERANCE = 1e-9


@dataclass
class LemmaReport:
    lemma: str
    lhs: float
    rhs: float
    tolerance: float = DEFAULT_TOLERANCE
    context: str = ""

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def passed(self) -> bool:
        return self.slack >= -self.tolerance * (1.0 + abs(self.rhs))

    def __str__(self) -> str:
        mark = "pass" if self.passed else "FAIL"
        return (
            f"[{mark}] {self.lemma}: lhs={self.lhs:.6e} rhs={self.rhs:.6e} "
            f"slack={self.slack:.3e} {self.context}"
        )


def _require_history(trace: RunTrace) -> tuple[np.ndarray, np.ndarray]:
    if trace.gradients is None or trace.iterates is None:
        raise ValueError("trace was recorded without full histories")
    gs = trace.gradients
    if gs.shape[0] < 1:
        raise ValueError("trace contains no update steps")
    xs = trace.iterates[: gs.shape[0]]
    return xs, gs


def _cumulative_roots(trace: RunTrace, gs: np.ndarray) -> np.ndarray:
    """Per-step roots A_t rebuilt from the gradients: (S,) or (S, d)."""
    if trace.scaling == "adagrad_norm":
        return np.sqrt(np.cumsum(np.einsum("td,td->t", gs, gs)))
    if trace.scaling == "adagrad_diag":
        return np.sqrt(np.cumsum(gs * gs, axis=0))
    raise ValueError("inequality checks apply to the cumulative scalings only")


def _alpha(trace: RunTrace) -> float:
    return 1.0 if trace.scaling == "adagrad_norm" else math.sqrt(trace.d)


def _final_trace(trace: RunTrace, roots: np.ndarray) -> float:
    return float(roots[-1]) if roots.ndim == 1 else float(roots[-1].sum())


def check_regret_bound(trace: RunTrace, domain: Domain, eta: float, x_ref) -> LemmaReport:
    """sum_t <g_t, x_t - x_ref> <= alpha (eta + D^2 / 2 eta) sqrt(sum_t ||g_t||^2)."""
    if not trace.projection:
        raise ValueError("regret check needs a projected run")
    x_ref = np.asarray(x_ref, dtype=np.float64)
    if not domain.contains(x_ref):
        raise ValueError("x_ref must be feasible")
    xs, gs = _require_history(trace)
    lhs = math.fsum(np.einsum("td,td->t", gs, xs - x_ref))
    total_gsq = math.fsum(np.einsum("td,td->t", gs, gs))
    rhs = _alpha(trace) * (eta + domain.diameter**2 / (2.0 * eta)) * math.sqrt(total_gsq)
    return LemmaReport("regret_bound", lhs, rhs, context=f"S={gs.shape[0]}")


def check_trace_bounds(trace: RunTrace) -> tuple[LemmaReport, LemmaReport]:
    """sum_t ||g_t||^2 in the inverse-root norm <= 2 Tr(A_S), and
    Tr(A_S) <= alpha sqrt(sum_t ||g_t||^2)."""
    _, gs = _require_history(trace)
    roots = _cumulative_roots(trace, gs)
    if roots.ndim == 1:
        gsq = np.einsum("td,td->t", gs, gs)
        terms = np.divide(gsq, roots, out=np.zeros_like(gsq), where=roots > 0)
    else:
        sq = gs * gs
        terms = np.divide(sq, roots, out=np.zeros_like(sq), where=roots > 0).sum(axis=1)
    tr_final = _final_trace(trace, roots)
    first = LemmaReport(
        "inverse_norm_sum", math.fsum(terms), 2.0 * tr_final, context=f"S={gs.shape[0]}"
    )
    total_gsq = math.fsum(np.einsum("td,td->t", gs, gs))
    second = LemmaReport(
        "trace_vs_gradients",
        tr_final,
        _alpha(trace) * math.sqrt(total_gsq),
        context=f"S={gs.shape[0]}",
    )
    return first, second


def check_weighted_distance(trace: RunTrace, domain: Domain, x_ref) -> LemmaReport:
    """sum_t ||x_t - x_ref||^2 weighted by (A_t - A_{t-1}) <= D^2 Tr(A_S)."""
    if not trace.projection:
        raise ValueError("weighted-distance check needs a projected run")
    x_ref = np.asarray(x_ref, dtype=np.float64)
    if not domain.contains(x_ref):
        raise ValueError("x_ref must be feasible")
    xs, gs = _require_history(trace)
    roots = _cumulative_roots(trace, gs)
    deltas = np.diff(roots, axis=0, prepend=np.zeros_like(roots[:1]))
    diff = xs - x_ref
    if roots.ndim == 1:
        terms = deltas * np.einsum("td,td->t", diff, diff)
    else:
        terms = np.einsum("td,td->t", deltas, diff * diff)
    rhs = domain.diameter**2 * _final_trace(trace, roots)
    return LemmaReport("weighted_distance", math.fsum(terms), rhs, context=f"S={gs.shape[0]}")


def check_grad_subopt(
    problem: FiniteSumProblem, x, x_star, f_star: float
) -> LemmaReport:
    """||grad f(x)||^2 <= 2 L (f(x) - f(x_star)), the squared form."""
    g = problem.full_grad(x)
    lhs = float(g @ g)
    rhs = 2.0 * problem.smoothness_bound() * (problem.value(x) - f_star)
    return LemmaReport("grad_suboptimality", lhs, rhs)


def quad_root_bound(a: float, b: float) -> float:
    """Largest admissible x for x^2 <= a (x + b), relaxed to a + sqrt(a b)."""
    if a < 0 or b < 0:
        raise ValueError("a and b must be nonnegative")
    return a + math.sqrt(a * b)


def _suite_problems(seed: int):
    """Small problem pool with reference solutions, mixed kinds and sizes."""
    pool = []
    data, _ = make_classification_data(40, 4, 3, seed=seed, label_noise=0.2)
    pool.append(make_problem("logistic", data, batch_size=4))
    data, _ = make_classification_data(30, 2, 2, seed=seed + 1, label_noise=0.3)
    pool.append(make_problem("logistic", data, batch_size=1))
    data, _ = make_regression_data(24, 5, seed=seed + 2, noise=0.5)
    pool.append(make_problem("ls", data, batch_size=2))
    data, _ = make_regression_data(10, 1, seed=seed + 3, noise=1.0)
    pool.append(make_problem("ls", data, batch_size=1))
    return [(prob,) + reference_solution(prob, tol=1e-8) for prob in pool]


VARIANTS = [
    (est, sc) for est in ("saga", "lsvrg") for sc in ("adagrad_norm", "adagrad_diag")
]


def run_verification_suite(seed: int = 0, n_runs: int = 48, t_max: int = 200) -> list[LemmaReport]:
    """Randomized projected runs checked against every inequality.

    Each run draws a problem from a fixed pool, one of the four
    estimator/scaling variants, a step parameter and a horizon, then checks
    the regret bound, both trace bounds, the weighted-distance bound and a
    gradient-suboptimality sample.
    """
    rng = make_rng(seed)
    pool = _suite_problems(seed)
    reports: list[LemmaReport] = []
    for k in range(n_runs):
        problem, x_star, f_star = pool[k % len(pool)]
        est, sc = VARIANTS[k % len(VARIANTS)]
        eta = float(10.0 ** rng.uniform(-1.5, 0.5))
        T = int(rng.integers(8, t_max))
        x1 = rng.normal(size=problem.d)
        halfwidth = 10.0 * float(np.linalg.norm(x1 - x_star)) + 1.0
        domain = Domain.centered_box(x1, halfwidth)
        config = OptimizerConfig(
            estimator=est,
            scaling=sc,
            eta=eta,
            T=T,
            seed=int(rng.integers(0, 2**31)),
            domain=domain,
            projection=True,
            record_history=True,
        )
        trace = run(config, problem, x1)
        x_ref = domain.project(x_star)
        ctx = f"run={k} {est}/{sc} {problem.kind} T={T}"
        rep = check_regret_bound(trace, domain, eta, x_ref)
        rep.context = ctx
        reports.append(rep)
        first, second = check_trace_bounds(trace)
        first.context = ctx
        second.context = ctx
        reports.extend([first, second])
        rep = check_weighted_distance(trace, domain, x_ref)
        rep.context = ctx
        reports.append(rep)
        x_probe = x_star + rng.normal(size=problem.d)
        rep = check_grad_subopt(problem, x_probe, x_star, f_star)
        rep.context = ctx
        reports.append(rep)
    return reports
