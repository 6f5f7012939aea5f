import math

import numpy as np
import pytest

from conftest import random_worker
from diradopt import WorkerJob
from diradopt.autarky import (
    activity_shares,
    autarky_allocation,
    autarky_output_per_budget,
    autarky_prices,
    jevons_share_derivative,
    output_per_budget_exponent,
    productivity_index,
    solve_autarky,
)
from diradopt.model_core import ces_output, cet_cost, concave_maximize, normalize, unit_revenue
from diradopt.oracle import GridSpec, grid_autarky


def worker(theta=(1, 1), s=(1, 1), sigma=2.0, gamma=1.0, budget=1.0):
    return WorkerJob(np.array(theta, float), np.array(s, float), sigma, gamma, budget)


class TestProductivityIndex:
    @pytest.mark.parametrize("sigma, gamma", [(2, 1), (0.5, 3), (7, 0.2)])
    def test_symmetric_is_two(self, sigma, gamma):
        assert productivity_index(worker(sigma=sigma, gamma=gamma)) == pytest.approx(2.0, rel=1e-14)

    def test_skill_tilt(self):
        assert productivity_index(worker(s=(1.2, 1))) == pytest.approx(1.2 ** (1 / 3) + 1, rel=1e-14)
        assert productivity_index(worker(s=(1.2, 1))) == pytest.approx(2.06266, abs=1e-5)

    def test_increasing_in_skill_for_substitutes(self):
        base = worker(theta=(1, 2), s=(1.2, 0.8), sigma=2.5)
        bumped = base.replace(s=np.array([1.2 + 1e-3, 0.8]))
        assert productivity_index(bumped) > productivity_index(base)


class TestAllocation:
    def test_symmetric(self):
        sol = solve_autarky(worker())
        np.testing.assert_allclose(sol.x_A, [1 / math.sqrt(2)] * 2, rtol=1e-14)
        np.testing.assert_allclose(sol.p_A, [1 / math.sqrt(2)] * 2, rtol=1e-14)
        assert sol.output == pytest.approx(2 * math.sqrt(2), rel=1e-14)
        assert sol.rho_A == pytest.approx(1.0, rel=1e-14)

    def test_skill_tilted_prices(self):
        # p_A proportional to ((1/1.2)**(1/3), 1)
        p = autarky_prices(worker(s=(1.2, 1)))
        expected = normalize(np.array([(1 / 1.2) ** (1 / 3), 1.0]))
        np.testing.assert_allclose(p, expected, rtol=1e-14)
        np.testing.assert_allclose(p, [0.68531, 0.72825], atol=1e-5)

    def test_single_task(self):
        w = WorkerJob(np.array([1.5]), np.array([2.0]), 3.0, 1.0, 2.0)
        sol = solve_autarky(w)
        assert sol.x_A[0] == pytest.approx(2.0 * 2.0 ** 0.5, rel=1e-14)
        np.testing.assert_allclose(sol.p_A, [1.0])
        np.testing.assert_allclose(sol.shares, [1.0])

    def test_on_frontier(self, rng):
        for _ in range(50):
            w = random_worker(rng, budget=rng.uniform(0.1, 10))
            assert cet_cost(autarky_allocation(w), w)[0] == pytest.approx(w.budget, rel=1e-12)

    def test_matches_solver(self, rng):
        for _ in range(30):
            w = random_worker(rng)
            np.testing.assert_allclose(concave_maximize(w, w.budget).x, autarky_allocation(w), rtol=1e-6)

    def test_matches_grid_oracle(self):
        w = worker(theta=(1, 2.5), s=(0.7, 1.4), sigma=1.8, gamma=0.7)
        brute = grid_autarky(w, GridSpec(resolution=1000, dimension=2, refinements=3))
        np.testing.assert_allclose(brute.x, autarky_allocation(w), rtol=1e-4)

    def test_grid_oracle_three_tasks(self):
        w = worker(theta=(1, 2, 0.5), s=(2, 0.7, 1), sigma=0.6, gamma=2.0)
        brute = grid_autarky(w, GridSpec(resolution=200, dimension=3, refinements=3))
        np.testing.assert_allclose(brute.x, autarky_allocation(w), rtol=1e-4)

    def test_prices_support_the_optimum(self, rng):
        for _ in range(50):
            w = random_worker(rng)
            sol = solve_autarky(w)
            _, grad = ces_output(sol.x_A, w)
            assert 1 - sol.p_A @ normalize(grad) < 1e-8
            assert sol.p_A @ sol.x_A == pytest.approx(w.budget * unit_revenue(sol.p_A, w), rel=1e-9)

    def test_extreme_parameters_stay_finite(self):
        w = worker(theta=(1e-3, 5), s=(3, 1e-2), sigma=0.05, gamma=200.0)
        sol = solve_autarky(w)
        assert np.all(np.isfinite(sol.x_A)) and np.all(np.isfinite(sol.p_A))
        assert cet_cost(sol.x_A, w)[0] == pytest.approx(1.0, rel=1e-10)


class TestOutputPerBudget:
    def test_symmetric_is_two_root_two(self):
        w = worker()
        assert autarky_output_per_budget(w) == pytest.approx(2 * math.sqrt(2), rel=1e-14)
        # the naive exponent sigma/(sigma-1) would give Phi**2 = 4
        assert productivity_index(w) ** output_per_budget_exponent(w) == pytest.approx(2 * math.sqrt(2), rel=1e-14)

    def test_single_unit_task(self):
        w = WorkerJob(np.array([1.0]), np.array([1.0]), 2.0, 1.0)
        assert autarky_output_per_budget(w) == pytest.approx(1.0)

    @pytest.mark.parametrize("budget", [0.5, 1.0, 7.0])
    def test_independent_of_budget(self, budget):
        w = worker(theta=(1, 2), s=(1.3, 0.6), sigma=3.0, gamma=0.5, budget=budget)
        reference = autarky_output_per_budget(w.replace(budget=1.0))
        assert autarky_output_per_budget(w) == pytest.approx(reference, rel=1e-13)

    def test_closed_form_power_of_index(self, rng):
        for _ in range(50):
            w = random_worker(rng)
            predicted = productivity_index(w) ** output_per_budget_exponent(w)
            assert predicted == pytest.approx(float(ces_output(autarky_allocation(w), w)[0]) / w.budget, rel=1e-9)


class TestActivityShares:
    def test_tilted(self):
        w = worker(s=(1.2, 1))
        omega = activity_shares(w)
        assert omega[0] == pytest.approx(1.2 ** (1 / 3) / (1.2 ** (1 / 3) + 1), rel=1e-14)
        assert omega[0] == pytest.approx(0.51519, abs=1e-5)
        assert jevons_share_derivative(w, 0) > 0

    def test_complements_reverse_the_sign(self):
        assert jevons_share_derivative(worker(s=(1.2, 1), sigma=0.5), 0) < 0

    def test_symmetric(self):
        np.testing.assert_allclose(activity_shares(worker()), [0.5, 0.5])

    def test_shares_are_resource_shares(self, rng):
        # omega_i is the share of the budget spent on task i
        for _ in range(20):
            w = random_worker(rng)
            x = autarky_allocation(w)
            used = w.s ** (-1 / w.gamma) * x ** ((w.gamma + 1) / w.gamma)
            np.testing.assert_allclose(activity_shares(w), used / used.sum(), rtol=1e-10)

    def test_derivative_matches_finite_differences(self, rng):
        for _ in range(20):
            w = random_worker(rng)
            i = int(rng.integers(w.n))
            h = 1e-6 * w.s[i]
            up, down = w.s.copy(), w.s.copy()
            up[i] += h
            down[i] -= h
            fd = (activity_shares(w.replace(s=up))[i] - activity_shares(w.replace(s=down))[i]) / (2 * h)
            assert jevons_share_derivative(w, i) == pytest.approx(fd, rel=1e-5, abs=1e-12)

    def test_bad_index(self):
        with pytest.raises(IndexError):
            jevons_share_derivative(worker(), 2)
