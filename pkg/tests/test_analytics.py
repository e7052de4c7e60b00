import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairliq.analytics import (
    Trajectory,
    expected_shortfall,
    optimal_trajectory,
    realized_shortfall,
    step_reward,
    utility,
    variance,
)
from fairliq.experiment import paper_scenario
from fairliq.market import ParameterError

from oracles import (
    loop_expected_shortfall,
    loop_utility,
    loop_variance,
    minimize_utility,
    random_feasible_sales,
    relative_error,
)


class TestExpectedShortfall:
    def test_immediate_full_sale(self, paper_params):
        traj = Trajectory.from_sales([1e6], 1e6, paper_params.tau)
        assert expected_shortfall(traj, paper_params) == pytest.approx(1_062_500.0, rel=1e-12)

    def test_empty_position_costs_nothing(self, paper_params):
        traj = Trajectory.from_sales([0.0, 0.0, 0.0], 0.0, paper_params.tau)
        assert expected_shortfall(traj, paper_params) == 0.0

    def test_linear_trajectory_matches_loop(self, paper_params):
        x0 = 250_000.0
        sales = np.full(10, x0 / 10)
        traj = Trajectory.from_sales(sales, x0, paper_params.tau)
        got = expected_shortfall(traj, paper_params)
        want = loop_expected_shortfall(sales, x0, paper_params)
        assert relative_error(got, want) < 1e-12

    def test_random_trajectories_match_loop(self, paper_params, rng):
        for _ in range(50):
            x0 = float(rng.uniform(1.0, 1e6))
            m = int(rng.integers(1, 40))
            sales = random_feasible_sales(x0, m, rng)
            traj = Trajectory.from_sales(sales, x0, paper_params.tau)
            got = expected_shortfall(traj, paper_params)
            want = loop_expected_shortfall(sales, x0, paper_params)
            assert relative_error(got, want) < 1e-12

    def test_mismatched_lengths_rejected(self, paper_params):
        with pytest.raises(ValueError, match="equal-length"):
            Trajectory(
                sales=np.ones(3),
                remaining=np.zeros(4),
                tau=paper_params.tau,
                origin_inventory=3.0,
            )

    def test_partial_liquidation_rejected(self, paper_params):
        with pytest.raises(ValueError, match="liquidate fully"):
            Trajectory.from_sales([10.0, 10.0], 100.0, paper_params.tau)
        with pytest.raises(ValueError, match="nonnegative"):
            Trajectory.from_sales([150.0, -50.0], 100.0, paper_params.tau)

    def test_not_homogeneous_in_size(self, paper_params):
        # the quadratic term makes doubling the order more than double the cost
        x0 = 10_000.0
        small = Trajectory.from_sales([x0], x0, paper_params.tau)
        big = Trajectory.from_sales([2 * x0], 2 * x0, paper_params.tau)
        assert expected_shortfall(big, paper_params) > 2 * expected_shortfall(small, paper_params)


class TestVariance:
    def test_immediate_sale_has_no_risk(self, paper_params):
        traj = Trajectory.from_sales([5000.0], 5000.0, paper_params.tau)
        assert variance(traj, paper_params) == 0.0

    def test_hold_one_step_then_sell(self, paper_params):
        x0 = 7500.0
        traj = Trajectory.from_sales([0.0, x0], x0, paper_params.tau)
        want = paper_params.sigma_step**2 * paper_params.tau * x0**2
        assert variance(traj, paper_params) == pytest.approx(want, rel=1e-12)

    def test_random_trajectories_match_loop(self, paper_params, rng):
        for _ in range(50):
            x0 = float(rng.uniform(1.0, 1e6))
            m = int(rng.integers(1, 40))
            sales = random_feasible_sales(x0, m, rng)
            traj = Trajectory.from_sales(sales, x0, paper_params.tau)
            assert relative_error(
                variance(traj, paper_params), loop_variance(sales, x0, paper_params)
            ) < 1e-12


class TestUtility:
    def test_risk_neutral_equals_shortfall(self, paper_params):
        traj = Trajectory.from_sales([100.0, 200.0, 700.0], 1000.0, paper_params.tau)
        u = utility(traj, paper_params, 0.0)
        assert u.utility == u.expected_shortfall
        assert u.variance > 0.0

    def test_immediate_sale_utility_is_shortfall(self, paper_params):
        traj = Trajectory.from_sales([1e5], 1e5, paper_params.tau)
        u = utility(traj, paper_params, 1e-4)
        assert u.variance == 0.0
        assert u.utility == u.expected_shortfall

    def test_matches_independent_recomputation(self, paper_params, rng):
        lam = 1e-4
        for _ in range(25):
            x0 = float(rng.uniform(10.0, 1e6))
            sales = random_feasible_sales(x0, int(rng.integers(1, 30)), rng)
            got = utility(
                Trajectory.from_sales(sales, x0, paper_params.tau), paper_params, lam
            ).utility
            assert relative_error(got, loop_utility(sales, x0, lam, paper_params)) < 1e-12

    def test_negative_risk_aversion_rejected(self, paper_params):
        traj = Trajectory.from_sales([10.0], 10.0, paper_params.tau)
        with pytest.raises(ParameterError):
            utility(traj, paper_params, -1e-6)


class TestOptimalTrajectory:
    def test_risk_neutral_is_uniform(self, paper_params):
        x0, m = 48_000.0, 8
        traj = optimal_trajectory(x0, m, paper_params, 0.0)
        assert np.allclose(traj.sales, x0 / m, rtol=1e-12)
        u = utility(traj, paper_params, 0.0).utility
        assert relative_error(u, minimize_utility(x0, m, 0.0, paper_params)) < 1e-6

    def test_extreme_risk_aversion_front_loads(self, paper_params):
        x0, m = 100_000.0, 8
        lam = 1e-4 * 1e6
        traj = optimal_trajectory(x0, m, paper_params, lam)
        assert traj.sales[0] / x0 > 0.99
        u = utility(traj, paper_params, lam).utility
        assert relative_error(u, minimize_utility(x0, m, lam, paper_params)) < 1e-6

    def test_single_step_sells_everything(self, paper_params):
        x0 = 1e6
        traj = optimal_trajectory(x0, 1, paper_params, 1e-4)
        assert traj.sales.tolist() == [x0]
        u = utility(traj, paper_params, 1e-4)
        want = paper_params.epsilon * x0 + paper_params.eta * x0**2 / paper_params.tau
        assert u.utility == pytest.approx(want, rel=1e-12)

    @pytest.mark.parametrize("m", [2, 4, 8, 16])
    @pytest.mark.parametrize("lam", [0.0, 1e-6, 1e-4])
    def test_oracle_equivalence(self, paper_params, m, lam, rng):
        x0 = float(rng.uniform(1e3, 1e6))
        u = utility(optimal_trajectory(x0, m, paper_params, lam), paper_params, lam).utility
        assert relative_error(u, minimize_utility(x0, m, lam, paper_params)) < 1e-6

    def test_beats_random_feasible_trajectories(self, paper_params, rng):
        lam = 1e-4
        for m in (2, 5, 16):
            x0 = float(rng.uniform(1e3, 1e6))
            best = utility(optimal_trajectory(x0, m, paper_params, lam), paper_params, lam).utility
            for _ in range(1000):
                sales = random_feasible_sales(x0, m, rng)
                candidate = utility(
                    Trajectory.from_sales(sales, x0, paper_params.tau), paper_params, lam
                ).utility
                assert best <= candidate * (1 + 1e-12)

    def test_monotone_remaining_and_full_liquidation(self, paper_params, rng):
        for _ in range(20):
            x0 = float(rng.uniform(1.0, 1e6))
            m = int(rng.integers(1, 300))
            lam = float(rng.choice([0.0, 1e-6, 1e-4, 1e-2]))
            traj = optimal_trajectory(x0, m, paper_params, lam)
            assert np.all(traj.sales >= 0.0)
            assert traj.remaining[-1] == 0.0
            assert np.all(np.diff(traj.remaining) <= 1e-9 * x0)

    def test_huge_risk_aversion_stays_finite(self, paper_params):
        # large kappa*T must not overflow the hyperbolic closed form
        traj = optimal_trajectory(1e6, 480, paper_params, 1e3)
        assert np.all(np.isfinite(traj.sales))
        assert traj.sales[0] / 1e6 > 0.999

    def test_invalid_arguments(self, paper_params):
        with pytest.raises(ParameterError):
            optimal_trajectory(100.0, 0, paper_params, 0.0)
        with pytest.raises(ParameterError):
            optimal_trajectory(100.0, 4, paper_params, -1.0)
        with pytest.raises(ParameterError):
            optimal_trajectory(-5.0, 4, paper_params, 0.0)

    def test_convexity_midpoint(self, paper_params, rng):
        lam = 1e-4
        m = 12
        for _ in range(200):
            x0 = float(rng.uniform(10.0, 1e5))
            a = random_feasible_sales(x0, m, rng)
            b = random_feasible_sales(x0, m, rng)
            mid = (a + b) / 2.0
            ua = loop_utility(a, x0, lam, paper_params)
            ub = loop_utility(b, x0, lam, paper_params)
            umid = loop_utility(mid, x0, lam, paper_params)
            assert umid <= (ua + ub) / 2.0 + 1e-9 * max(ua, ub)


class TestStepReward:
    def test_liquidating_everything_pays_full_utility(self, paper_params):
        x0, m = 20_000.0, 10
        u0 = utility(optimal_trajectory(x0, m, paper_params, 1e-4), paper_params, 1e-4).utility
        assert step_reward(x0, m, 0.0, m - 1, paper_params, 1e-4) == u0

    def test_telescoping_over_full_episode(self, paper_params, rng):
        lam = 1e-4
        for _ in range(20):
            x0 = float(rng.uniform(100.0, 1e6))
            m = int(rng.integers(2, 40))
            u0 = utility(optimal_trajectory(x0, m, paper_params, lam), paper_params, lam).utility
            x = x0
            total = 0.0
            for t in range(m):
                frac = float(rng.uniform(0.0, 1.0)) if t < m - 1 else 1.0
                new_x = 0.0 if t == m - 1 else x * (1.0 - frac)
                total += step_reward(x, m - t, new_x, m - t - 1, paper_params, lam)
                x = new_x
            assert relative_error(total, u0) < 1e-9

    def test_first_optimal_step_reward_against_oracle(self, paper_params):
        lam, x0, m = 1e-4, 50_000.0, 8
        plan = optimal_trajectory(x0, m, paper_params, lam)
        left = x0 - plan.sales[0]
        got = step_reward(x0, m, left, m - 1, paper_params, lam)
        want = minimize_utility(x0, m, lam, paper_params) - minimize_utility(
            left, m - 1, lam, paper_params
        )
        assert relative_error(got, want) < 1e-5

    def test_contract_violations(self, paper_params):
        with pytest.raises(ValueError, match="decrease by exactly one"):
            step_reward(100.0, 5, 50.0, 3, paper_params, 0.0)
        with pytest.raises(ValueError, match="may not increase"):
            step_reward(100.0, 5, 150.0, 4, paper_params, 0.0)
        with pytest.raises(ValueError, match="zero steps"):
            step_reward(100.0, 1, 50.0, 0, paper_params, 0.0)

    def test_zero_inventory_rewards_are_zero(self, paper_params):
        assert step_reward(0.0, 7, 0.0, 6, paper_params, 1e-4) == 0.0


class TestRealizedShortfall:
    def test_selling_at_decision_price_costs_nothing(self):
        assert realized_shortfall([500.0 * 50.0], 500.0, 50.0) == 0.0

    def test_market_example(self):
        # one sale of 10000 at 49.9275 against a 50.00 decision price
        assert realized_shortfall([10_000 * 49.9275], 10_000.0, 50.0) == pytest.approx(
            725.0, rel=1e-12
        )

    def test_rejects_non_vector(self):
        with pytest.raises(ValueError, match="vector"):
            realized_shortfall(np.ones((2, 2)), 4.0, 50.0)


_PAPER = paper_scenario().market


@settings(max_examples=60, deadline=None)
@given(
    x0=st.floats(1.0, 1e6),
    m=st.integers(1, 24),
    lam=st.sampled_from([0.0, 1e-6, 1e-4]),
    seed=st.integers(0, 2**32 - 1),
)
def test_random_schedule_never_beats_optimum(x0, m, lam, seed):
    rng = np.random.default_rng(seed)
    best = utility(optimal_trajectory(x0, m, _PAPER, lam), _PAPER, lam).utility
    sales = random_feasible_sales(x0, m, rng)
    candidate = utility(Trajectory.from_sales(sales, x0, _PAPER.tau), _PAPER, lam).utility
    assert best <= candidate * (1 + 1e-12)
