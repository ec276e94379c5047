import numpy as np
import pytest

from adalvr.estimators import make_estimator
from adalvr.prng import make_rng
from adalvr.problems import Dataset, make_classification_data, make_problem, make_regression_data
from adalvr.optimizer import reference_solution


def small_logistic(seed=0, n_samples=24, batch=2):
    ds, _ = make_classification_data(n_samples, 3, 3, seed=seed, label_noise=0.2)
    return make_problem("logistic", ds, batch)


def manual_estimates(est, problem, x):
    """Rebuild the estimate for every index draw straight from the problem,
    bypassing the estimator's own enumeration path."""
    n = problem.n_components
    if est.kind == "sgd":
        return [problem.component_grad(i, x) for i in range(n)]
    if est.kind == "saga":
        mean = est.table.mean(axis=0)
        return [
            problem.component_grad(i, x) - est.table[i] + mean for i in range(n)
        ]
    if est.kind == "lsvrg":
        return [
            problem.component_grad(i, x)
            - problem.component_grad(i, est.anchor)
            + est.anchor_grad
            for i in range(n)
        ]
    raise AssertionError(est.kind)


class TestInitialization:
    def test_saga_table_holds_component_grads(self):
        prob = small_logistic()
        x1 = np.full(prob.d, 0.3)
        est = make_estimator("saga", prob, x1, seed=0)
        for i in range(prob.n_components):
            np.testing.assert_array_equal(est.table[i], prob.component_grad(i, x1))
        assert est.gradient_count == prob.n_components

    def test_saga_estimate_at_start_is_full_grad(self):
        prob = small_logistic()
        x1 = np.zeros(prob.d)
        est = make_estimator("saga", prob, x1, seed=1)
        g = est.estimate(x1)
        np.testing.assert_allclose(g, prob.full_grad(x1), rtol=1e-12, atol=1e-15)

    def test_lsvrg_anchor_gradient(self):
        prob = small_logistic()
        x1 = np.full(prob.d, -0.2)
        est = make_estimator("lsvrg", prob, x1, seed=2)
        np.testing.assert_array_equal(est.anchor_grad, prob.full_grad(x1))
        assert est.gradient_count == prob.n_components

    def test_lsvrg_single_component_collapse(self):
        ds, _ = make_regression_data(4, 2, seed=3)
        prob = make_problem("ls", ds, 4)  # one component
        est = make_estimator("lsvrg", prob, np.zeros(2), seed=4)
        rng = make_rng(5)
        for _ in range(5):
            x = rng.normal(size=2)
            np.testing.assert_allclose(est.estimate(x), prob.full_grad(x), rtol=1e-12)

    def test_invalid_refresh_probability(self):
        prob = small_logistic()
        with pytest.raises(ValueError):
            make_estimator("lsvrg", prob, np.zeros(prob.d), p=1.0)
        with pytest.raises(ValueError):
            make_estimator("lsvrg", prob, np.zeros(prob.d), p=0.0)


class TestUnbiasedness:
    @pytest.mark.parametrize("kind", ["sgd", "saga", "lsvrg"])
    def test_expectation_matches_full_grad(self, kind):
        prob = small_logistic(seed=6)
        rng = make_rng(7)
        est = make_estimator(kind, prob, rng.normal(size=prob.d), seed=8)
        for _ in range(15):  # scramble the memory
            est.estimate(rng.normal(size=prob.d))
        x = rng.normal(size=prob.d)
        expect = est.expectation(x)
        full = prob.full_grad(x)
        assert np.abs(expect - full).max() <= 1e-12
        # independent enumeration of the sampling law
        manual = np.mean(manual_estimates(est, prob, x), axis=0)
        np.testing.assert_allclose(expect, manual, rtol=1e-12, atol=1e-15)

    def test_expectation_does_not_touch_memory(self):
        prob = small_logistic(seed=9)
        est = make_estimator("saga", prob, np.zeros(prob.d), seed=10)
        table_before = est.table.copy()
        count_before = est.gradient_count
        est.expectation(np.ones(prob.d))
        np.testing.assert_array_equal(est.table, table_before)
        assert est.gradient_count == count_before

    def test_capacity_guard(self):
        ds, _ = make_regression_data(10_001, 1, seed=11)
        prob = make_problem("ls", ds, 1)
        est = make_estimator("sgd", prob, np.zeros(1))
        with pytest.raises(ValueError, match="enumeration"):
            est.expectation(np.zeros(1))


class TestVariance:
    def test_saga_zero_right_after_init(self):
        prob = small_logistic(seed=12)
        x1 = np.full(prob.d, 0.1)
        est = make_estimator("saga", prob, x1, seed=13)
        var, _ = est.second_moment_stats(x1)
        assert var == 0.0

    def test_sgd_two_component_antisymmetric(self):
        # grads at x=0 are +1 and -1, so E g = 0 and E||g - E g||^2 = 1
        ds = Dataset(np.array([[1.0], [1.0]]), np.array([-1.0, 1.0]))
        prob = make_problem("ls", ds, 1)
        est = make_estimator("sgd", prob, np.zeros(1))
        var, second = est.second_moment_stats(np.zeros(1))
        assert var == pytest.approx(1.0, abs=1e-15)
        assert second == pytest.approx(1.0, abs=1e-15)

    def test_variance_vanishes_at_optimum(self):
        ds, _ = make_regression_data(18, 3, seed=14)
        prob = make_problem("ls", ds, 2)
        x_star, _ = reference_solution(prob)
        for kind in ("saga", "lsvrg"):
            est = make_estimator(kind, prob, x_star, seed=15)
            var, _ = est.second_moment_stats(x_star)
            assert var <= 1e-24
        sgd_var, _ = make_estimator("sgd", prob, x_star).second_moment_stats(x_star)
        assert sgd_var > 1e-8

    @pytest.mark.parametrize("kind", ["saga", "lsvrg"])
    def test_second_moment_decomposition_bound(self, kind):
        ds, _ = make_regression_data(20, 3, seed=16)
        prob = make_problem("ls", ds, 2)
        x_star, _ = reference_solution(prob)
        rng = make_rng(17)
        est = make_estimator(kind, prob, rng.normal(size=prob.d), seed=18)
        for _ in range(12):
            est.estimate(rng.normal(size=prob.d))
        n = prob.n_components
        for _ in range(5):
            x = rng.normal(size=prob.d)
            _, second = est.second_moment_stats(x)
            star = [prob.component_grad(i, x_star) for i in range(n)]
            term1 = np.mean(
                [np.sum((prob.component_grad(i, x) - star[i]) ** 2) for i in range(n)]
            )
            if kind == "saga":
                memory = [est.table[i] for i in range(n)]
            else:
                memory = [prob.component_grad(i, est.anchor) for i in range(n)]
            term2 = np.mean([np.sum((memory[i] - star[i]) ** 2) for i in range(n)])
            rhs = 2 * term1 + 2 * term2
            assert second <= rhs * (1 + 1e-9)


class TestMemoryMaintenance:
    def test_table_mean_coherence_long_run(self):
        prob = small_logistic(seed=19, n_samples=30, batch=3)
        rng = make_rng(20)
        est = make_estimator("saga", prob, rng.normal(size=prob.d), seed=21)
        for _ in range(10_000):
            est.estimate(rng.normal(size=prob.d))
        recomputed = est.table.mean(axis=0)
        assert np.abs(est.table_mean() - recomputed).max() <= 1e-10

    def test_saga_tracked_points(self):
        prob = small_logistic(seed=22)
        x1 = np.zeros(prob.d)
        est = make_estimator("saga", prob, x1, seed=23, track_points=True)
        x = np.ones(prob.d)
        est.estimate(x)
        # exactly one memory point moved from x1 to x
        moved = [i for i in range(prob.n_components) if not np.array_equal(est.points[i], x1)]
        assert len(moved) == 1
        np.testing.assert_array_equal(est.points[moved[0]], x)
        np.testing.assert_array_equal(est.table[moved[0]], prob.component_grad(moved[0], x))

    def test_lsvrg_anchor_gradient_consistency(self):
        prob = small_logistic(seed=24)
        rng = make_rng(25)
        est = make_estimator("lsvrg", prob, np.zeros(prob.d), p=0.3, seed=26)
        for _ in range(50):
            est.estimate(rng.normal(size=prob.d))
        np.testing.assert_allclose(
            est.anchor_grad, prob.full_grad(est.anchor), rtol=1e-12, atol=1e-15
        )
        assert est.refresh_count > 0

    def test_gradient_count_nondecreasing(self):
        prob = small_logistic(seed=27)
        est = make_estimator("lsvrg", prob, np.zeros(prob.d), seed=28)
        rng = make_rng(29)
        prev = est.gradient_count
        for _ in range(40):
            est.estimate(rng.normal(size=prob.d))
            assert est.gradient_count >= prev
            prev = est.gradient_count


class TestDeterminism:
    @pytest.mark.parametrize("kind", ["sgd", "saga", "lsvrg"])
    def test_identical_seeds_identical_streams(self, kind):
        prob = small_logistic(seed=30)
        rng = make_rng(31)
        xs = [rng.normal(size=prob.d) for _ in range(20)]
        a = make_estimator(kind, prob, np.zeros(prob.d), seed=32)
        b = make_estimator(kind, prob, np.zeros(prob.d), seed=32)
        for x in xs:
            np.testing.assert_array_equal(a.estimate(x), b.estimate(x))
        assert a.gradient_count == b.gradient_count

    def test_full_batch_is_exact(self):
        prob = small_logistic(seed=33)
        est = make_estimator("full_batch", prob, np.zeros(prob.d))
        x = np.ones(prob.d)
        np.testing.assert_array_equal(est.estimate(x), prob.full_grad(x))
        assert est.gradient_count == prob.n_components
        var, _ = est.second_moment_stats(x)
        assert var == 0.0
