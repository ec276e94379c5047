import math

import numpy as np
import pytest

from adalvr.optimizer import OptimizerConfig, RunTrace, reference_solution, run
from adalvr.prng import make_rng
from adalvr.problems import make_classification_data, make_problem, make_regression_data
from adalvr.scaling import Domain
from adalvr.verify import (
    VARIANTS,
    LemmaReport,
    check_grad_subopt,
    check_regret_bound,
    check_trace_bounds,
    check_weighted_distance,
    quad_root_bound,
    run_verification_suite,
)
from adalvr.problems import Dataset


def history_trace(gs, xs, scaling="adagrad_norm", projection=True, eta=1.0):
    gs = np.asarray(gs, dtype=np.float64)
    xs = np.asarray(xs, dtype=np.float64)
    k = np.zeros(gs.shape[0])
    return RunTrace(
        estimator="saga",
        scaling=scaling,
        eta=eta,
        seed=0,
        T=gs.shape[0] + 1,
        d=gs.shape[1],
        n_components=2,
        projection=projection,
        steps=np.arange(1, gs.shape[0] + 1),
        gradient_counts=np.arange(1, gs.shape[0] + 1),
        objective=k.copy(),
        avg_objective=k.copy(),
        grad_norm_sq=np.einsum("td,td->t", gs, gs),
        root_trace=k.copy(),
        x_avg=xs[-1].copy(),
        x_final=xs[-1].copy(),
        first_objective=0.0,
        final_avg_objective=0.0,
        gradient_count=gs.shape[0],
        iterates=xs,
        gradients=gs,
    )


def recorded_run(seed=0, estimator="saga", scaling="adagrad_diag", T=120, eta=0.7):
    ds, _ = make_classification_data(24, 3, 3, seed=seed, label_noise=0.25)
    prob = make_problem("logistic", ds, 2)
    x_star, f_star = reference_solution(prob, tol=1e-8)
    x1 = np.zeros(prob.d)
    dom = Domain.centered_box(x1, 10.0 * float(np.linalg.norm(x1 - x_star)) + 1.0)
    cfg = OptimizerConfig(
        estimator, scaling, eta=eta, T=T, seed=seed, domain=dom, projection=True,
        record_history=True,
    )
    return run(cfg, prob, x1), prob, dom, dom.project(x_star), f_star


class TestReportLogic:
    def test_pass_threshold(self):
        assert LemmaReport("x", 1.0, 1.0).passed
        assert LemmaReport("x", 1.0 + 1e-10, 1.0).passed  # inside tolerance
        assert not LemmaReport("x", 1.1, 1.0).passed

    def test_slack(self):
        rep = LemmaReport("x", 0.25, 1.0)
        assert rep.slack == 0.75


class TestRegretBound:
    def test_zero_gradient_single_step(self):
        x = np.array([0.5, 0.5])
        trace = history_trace([[0.0, 0.0]], [x])
        dom = Domain.box([0.0, 0.0], [1.0, 1.0])
        rep = check_regret_bound(trace, dom, eta=1.0, x_ref=np.array([0.2, 0.2]))
        assert rep.lhs == 0.0 and rep.rhs == 0.0 and rep.passed

    def test_recorded_run_passes(self):
        trace, _, dom, x_ref, _ = recorded_run()
        rep = check_regret_bound(trace, dom, trace.eta, x_ref)
        assert rep.passed

    def test_adversarial_trace_fails(self):
        # iterates pushed far along the gradients violate the bound
        g = np.array([1.0, 0.0])
        gs = np.tile(g, (20, 1))
        xs = np.tile(1e6 * g, (20, 1))
        trace = history_trace(gs, xs)
        dom = Domain.box([-1.0, -1.0], [1.0, 1.0])
        rep = check_regret_bound(trace, dom, eta=1.0, x_ref=np.zeros(2))
        assert not rep.passed

    def test_requires_projection_and_history(self):
        trace, _, dom, x_ref, _ = recorded_run()
        trace.projection = False
        with pytest.raises(ValueError):
            check_regret_bound(trace, dom, trace.eta, x_ref)
        trace.projection = True
        trace.gradients = None
        with pytest.raises(ValueError):
            check_regret_bound(trace, dom, trace.eta, x_ref)

    def test_infeasible_reference_rejected(self):
        trace, _, dom, _, _ = recorded_run()
        outside = dom.upper + 1.0
        with pytest.raises(ValueError):
            check_regret_bound(trace, dom, trace.eta, outside)


class TestTraceBounds:
    def test_scalar_base_case(self):
        g = np.array([3.0, 4.0])
        trace = history_trace([g], [np.zeros(2)], scaling="adagrad_norm")
        first, second = check_trace_bounds(trace)
        # single step: ||g||^2 / A_1 = A_1 = 5, bounded by 2 Tr(A_1) = 10
        assert first.lhs == pytest.approx(5.0)
        assert first.rhs == pytest.approx(10.0)
        assert second.lhs == pytest.approx(5.0)
        assert second.rhs == pytest.approx(5.0)  # alpha = 1: equality
        assert first.passed and second.passed

    def test_diagonal_base_case_one_hot(self):
        # one nonzero coordinate: Tr(A_1) = |g_k|, bound alpha ||g|| = sqrt(d) |g_k|
        g = np.array([2.0, 0.0])
        trace = history_trace([g], [np.zeros(2)], scaling="adagrad_diag")
        first, second = check_trace_bounds(trace)
        assert second.lhs == pytest.approx(2.0)
        assert second.rhs == pytest.approx(math.sqrt(2.0) * 2.0)
        assert second.passed

    def test_diagonal_base_case_d1_equality(self):
        trace = history_trace([[1.5]], [[0.0]], scaling="adagrad_diag")
        _, second = check_trace_bounds(trace)
        assert second.lhs == pytest.approx(second.rhs)

    def test_recorded_run_passes(self):
        trace, _, _, _, _ = recorded_run(seed=1, scaling="adagrad_norm")
        first, second = check_trace_bounds(trace)
        assert first.passed and second.passed

    def test_unsupported_scaling_rejected(self):
        trace = history_trace([[1.0]], [[0.0]], scaling="rmsprop")
        with pytest.raises(ValueError):
            check_trace_bounds(trace)


class TestWeightedDistance:
    def test_stationary_trace(self):
        x = np.array([0.25, 0.75])
        gs = np.tile([0.3, -0.1], (10, 1))
        xs = np.tile(x, (10, 1))
        trace = history_trace(gs, xs, scaling="adagrad_diag")
        dom = Domain.box([0.0, 0.0], [1.0, 1.0])
        rep = check_weighted_distance(trace, dom, x_ref=x)
        assert rep.lhs == 0.0 and rep.passed

    def test_recorded_run_feasible_corner(self):
        trace, _, dom, _, _ = recorded_run(seed=2)
        rep = check_weighted_distance(trace, dom, x_ref=dom.lower)
        assert rep.passed

    def test_understated_diameter_fails(self):
        # iterates at distance 10 from x_ref, box of diameter 2
        gs = np.tile([1.0, 0.0], (5, 1))
        xs = np.tile([10.0, 0.0], (5, 1))
        trace = history_trace(gs, xs, scaling="adagrad_norm")
        dom = Domain.box([-1.0, -1.0], [1.0, 1.0])
        rep = check_weighted_distance(trace, dom, x_ref=np.zeros(2))
        assert not rep.passed


class TestGradSubopt:
    def test_at_minimizer(self):
        ds, _ = make_regression_data(15, 3, seed=3)
        prob = make_problem("ls", ds, 3)
        x_star, f_star = reference_solution(prob)
        rep = check_grad_subopt(prob, x_star, x_star, f_star)
        assert rep.passed
        assert abs(rep.lhs) < 1e-18

    def test_two_point_ls_equality(self):
        prob = make_problem(
            "ls", Dataset(np.array([[1.0], [1.0]]), np.array([0.0, 2.0])), 1
        )
        rep = check_grad_subopt(prob, np.array([0.0]), np.array([1.0]), 0.5)
        # lhs = ||grad f(0)||^2 = 1; rhs = 2 * 1 * (1 - 0.5) = 1
        assert rep.lhs == pytest.approx(1.0)
        assert rep.rhs == pytest.approx(1.0)
        assert rep.passed

    def test_random_logistic_points(self):
        ds, _ = make_classification_data(30, 3, 3, seed=4, label_noise=0.2)
        prob = make_problem("logistic", ds, 3)
        x_star, f_star = reference_solution(prob, tol=1e-8)
        rng = make_rng(5)
        for _ in range(20):
            rep = check_grad_subopt(prob, x_star + rng.normal(size=prob.d), x_star, f_star)
            assert rep.passed


class TestQuadRootBound:
    def test_unit_case(self):
        assert quad_root_bound(1.0, 0.0) == 1.0

    def test_degenerate(self):
        assert quad_root_bound(0.0, 5.0) == 0.0

    def test_negative_inputs_rejected(self):
        with pytest.raises(ValueError):
            quad_root_bound(-1.0, 0.0)
        with pytest.raises(ValueError):
            quad_root_bound(1.0, -0.1)

    def test_root_interval_oracle(self):
        rng = make_rng(6)
        for _ in range(200):
            a = float(rng.random() * 5)
            b = float(rng.random() * 5)
            disc = math.sqrt(a * a + 4 * a * b)
            r1, r2 = (a - disc) / 2, (a + disc) / 2
            x = float(rng.uniform(r1, r2))
            assert x * x <= a * (x + b) + 1e-12  # premise holds on the interval
            assert x <= quad_root_bound(a, b) + 1e-12


class TestSuite:
    def test_default_suite_passes(self):
        reports = run_verification_suite(seed=0, n_runs=16, t_max=80)
        assert reports and all(r.passed for r in reports)
        kinds = {r.lemma for r in reports}
        assert kinds == {
            "regret_bound",
            "inverse_norm_sum",
            "trace_vs_gradients",
            "weighted_distance",
            "grad_suboptimality",
        }

    def test_randomized_runs_span_sizes_and_variants(self):
        """Inequalities hold across n in {2, 10, 200}, d in {1, 5, 50} and
        all four estimator/scaling variants."""
        rng = make_rng(7)
        pool = []
        ds, _ = make_regression_data(200, 1, seed=8, noise=0.5)
        pool.append(make_problem("ls", ds, 100))  # n=2, d=1
        ds, _ = make_regression_data(200, 5, seed=9, noise=0.5)
        pool.append(make_problem("ls", ds, 20))  # n=10, d=5
        ds, _ = make_regression_data(200, 1, seed=10, noise=0.5)
        pool.append(make_problem("ls", ds, 1))  # n=200, d=1
        ds, _ = make_classification_data(200, 1, 5, seed=11, label_noise=0.3)
        pool.append(make_problem("logistic", ds, 20))  # n=10, d=5
        ds, _ = make_classification_data(200, 10, 5, seed=12, label_noise=0.3)
        pool.append(make_problem("logistic", ds, 1))  # n=200, d=50
        ds, _ = make_classification_data(40, 10, 5, seed=13, label_noise=0.3)
        pool.append(make_problem("logistic", ds, 20))  # n=2, d=50
        sizes_n = {p.n_components for p in pool}
        sizes_d = {p.d for p in pool}
        assert {2, 10, 200} <= sizes_n and {1, 5, 50} <= sizes_d

        refs = [reference_solution(p, tol=1e-8) for p in pool]
        n_runs = 1000
        n_failures = 0
        for k in range(n_runs):
            prob = pool[k % len(pool)]
            x_star, _ = refs[k % len(pool)]
            est, sc = VARIANTS[k % len(VARIANTS)]
            eta = float(10.0 ** rng.uniform(-1.5, 0.5))
            T = int(rng.integers(5, 40))
            x1 = rng.normal(size=prob.d)
            dom = Domain.centered_box(x1, 10.0 * float(np.linalg.norm(x1 - x_star)) + 1.0)
            cfg = OptimizerConfig(
                est, sc, eta=eta, T=T, seed=int(rng.integers(0, 2**31)),
                domain=dom, projection=True, record_history=True,
            )
            trace = run(cfg, prob, x1)
            x_ref = dom.project(x_star)
            checks = [
                check_regret_bound(trace, dom, eta, x_ref),
                *check_trace_bounds(trace),
                check_weighted_distance(trace, dom, x_ref),
            ]
            n_failures += sum(not c.passed for c in checks)
        assert n_failures == 0
