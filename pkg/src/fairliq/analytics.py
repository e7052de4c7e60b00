"""Deterministic Almgren-Chriss analytics.

Closed-form expected shortfall, variance and mean-variance utility of a
selling trajectory, the utility-minimizing trajectory for any remaining
inventory and horizon, and the per-step reward defined as the decrease
in optimal remaining utility between consecutive steps.

Conventions: ``remaining[k]`` is the *post-trade* inventory after sale
``k+1``; trajectories are real-valued (no integer rounding) and end at
zero inventory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .market import MarketParams, ParameterError

_REL_TOL = 1e-9


@dataclass(frozen=True)
class Trajectory:
    """A selling schedule: per-step sales and post-trade remaining shares."""

    sales: np.ndarray
    remaining: np.ndarray
    tau: float
    origin_inventory: float

    def __post_init__(self):
        sales = np.asarray(self.sales, dtype=float)
        remaining = np.asarray(self.remaining, dtype=float)
        object.__setattr__(self, "sales", sales)
        object.__setattr__(self, "remaining", remaining)
        if sales.shape != remaining.shape or sales.ndim != 1:
            raise ValueError(
                f"sales {sales.shape} and remaining {remaining.shape} must be equal-length vectors"
            )
        if sales.size == 0:
            raise ValueError("a trajectory needs at least one step")
        if self.tau <= 0:
            raise ParameterError(f"tau must be positive, got {self.tau}")

    @property
    def num_steps(self) -> int:
        return self.sales.size

    @classmethod
    def from_sales(cls, sales, origin_inventory: float, tau: float) -> "Trajectory":
        """Build a trajectory from per-step sales, deriving the remaining
        inventory; validates that everything is sold and nothing bought."""
        sales = np.asarray(sales, dtype=float)
        scale = max(abs(origin_inventory), 1.0)
        if np.any(sales < -_REL_TOL * scale):
            raise ValueError("sales must be nonnegative (selling only)")
        sales = np.maximum(sales, 0.0)
        remaining = origin_inventory - np.cumsum(sales)
        if abs(remaining[-1]) > _REL_TOL * scale:
            raise ValueError(
                f"trajectory must liquidate fully: leftover {remaining[-1]} of {origin_inventory}"
            )
        remaining = np.maximum(remaining, 0.0)
        remaining[-1] = 0.0
        return cls(sales=sales, remaining=remaining, tau=tau, origin_inventory=float(origin_inventory))


@dataclass(frozen=True)
class UtilityBreakdown:
    expected_shortfall: float
    variance: float
    utility: float
    risk_aversion: float


def expected_shortfall(traj: Trajectory, params: MarketParams) -> float:
    """Expected implementation shortfall of a schedule.

    Permanent-impact part sums gamma * x_k * n_k over post-trade
    inventories; temporary part charges eps*sgn(n_k) plus (eta/tau)*n_k
    per share sold.
    """
    n = traj.sales
    x = traj.remaining
    permanent = params.gamma * float(np.dot(x, n))
    temporary = float(
        np.dot(n, params.epsilon * np.sign(n) + (params.eta / traj.tau) * n)
    )
    return permanent + temporary


def variance(traj: Trajectory, params: MarketParams) -> float:
    """Price-risk variance sigma^2 * tau * sum x_k^2 of a schedule."""
    x = traj.remaining
    return params.sigma_step**2 * traj.tau * float(np.dot(x, x))


def utility(traj: Trajectory, params: MarketParams, risk_aversion: float) -> UtilityBreakdown:
    """Mean-variance utility U = E + lambda * V of a schedule."""
    if risk_aversion < 0:
        raise ParameterError(f"risk_aversion must be nonnegative, got {risk_aversion}")
    e = expected_shortfall(traj, params)
    v = variance(traj, params)
    return UtilityBreakdown(
        expected_shortfall=e,
        variance=v,
        utility=e + risk_aversion * v,
        risk_aversion=risk_aversion,
    )


def optimal_trajectory(
    remaining_shares: float,
    remaining_steps: int,
    params: MarketParams,
    risk_aversion: float,
) -> Trajectory:
    """Utility-minimizing liquidation of ``remaining_shares`` over
    ``remaining_steps`` trades.

    The cost is a convex quadratic in the sales vector whenever
    eta - gamma*tau/2 > 0; its exact discrete minimizer is the
    hyperbolic-sine schedule x_k = X sinh(kappa (T - t_k)) / sinh(kappa T)
    with cosh(kappa tau) = 1 + (lambda sigma^2 / eta_tilde) tau^2 / 2.
    Risk-neutral (lambda = 0) degenerates to uniform selling.  Computed
    with exponentials in difference form so large kappa*T cannot
    overflow.
    """
    if remaining_steps < 1 or int(remaining_steps) != remaining_steps:
        raise ParameterError(f"remaining_steps must be a positive integer, got {remaining_steps}")
    if risk_aversion < 0:
        raise ParameterError(f"risk_aversion must be nonnegative, got {risk_aversion}")
    if remaining_shares < 0:
        raise ParameterError(f"remaining_shares must be nonnegative, got {remaining_shares}")
    eta_tilde = params.convexity_adjusted_eta
    if eta_tilde <= 0:
        raise ParameterError(
            f"eta - gamma*tau/2 = {eta_tilde} is not positive; the cost is not convex"
        )

    m = int(remaining_steps)
    x0 = float(remaining_shares)
    tau = params.tau
    kappa_sq = risk_aversion * params.sigma_step**2 / eta_tilde
    kappa_tau = math.acosh(1.0 + kappa_sq * tau * tau / 2.0) if kappa_sq > 0.0 else 0.0
    if x0 == 0.0 or kappa_tau == 0.0:
        # risk-neutral optimum: uniform selling
        sales = np.full(m, x0 / m)
        ratios = (m - np.arange(1, m + 1)) / m
        remaining = x0 * ratios
    else:
        # s_j = kappa * (T - t_j), j = 0..m; x_j / X = sinh(s_j)/sinh(s_0)
        s = kappa_tau * (m - np.arange(m + 1))
        ratios = np.exp(s - s[0]) * np.expm1(-2.0 * s) / np.expm1(-2.0 * s[0])
        ratios[-1] = 0.0
        remaining = x0 * ratios[1:]
        sales = np.maximum(x0 * -np.diff(ratios), 0.0)
    remaining[-1] = 0.0
    return Trajectory(sales=sales, remaining=remaining, tau=tau, origin_inventory=x0)


def step_reward(
    prev_inventory: float,
    prev_steps: int,
    new_inventory: float,
    new_steps: int,
    params: MarketParams,
    risk_aversion: float,
) -> float:
    """Reward of one trade: optimal remaining utility before it minus
    optimal remaining utility after it.

    Zero inventory has zero utility regardless of steps left, so over a
    full episode the rewards telescope to the initial optimal utility.
    Positive inventory with zero steps left is undefined (the
    environment's forced final liquidation makes it unreachable).
    """
    if new_steps != prev_steps - 1:
        raise ValueError(
            f"step counts must decrease by exactly one, got {prev_steps} -> {new_steps}"
        )
    if prev_steps < 1:
        raise ValueError(f"prev_steps must be >= 1, got {prev_steps}")
    scale = max(abs(prev_inventory), 1.0)
    if new_inventory > prev_inventory + _REL_TOL * scale:
        raise ValueError(
            f"inventory may not increase: {prev_inventory} -> {new_inventory}"
        )

    if prev_inventory <= 0.0:
        u_prev = 0.0
    else:
        u_prev = utility(
            optimal_trajectory(prev_inventory, prev_steps, params, risk_aversion),
            params,
            risk_aversion,
        ).utility
    if new_inventory <= 0.0:
        u_new = 0.0
    elif new_steps == 0:
        raise ValueError("positive inventory with zero steps remaining has no utility")
    else:
        u_new = utility(
            optimal_trajectory(new_inventory, new_steps, params, risk_aversion),
            params,
            risk_aversion,
        ).utility
    return u_prev - u_new


def realized_shortfall(episode_captures, initial_shares: float, initial_price: float) -> float:
    """Implementation shortfall actually incurred: the position valued at
    the decision price minus the cash captured while selling."""
    captures = np.asarray(episode_captures, dtype=float)
    if captures.ndim != 1:
        raise ValueError(f"captures must be a vector, got shape {captures.shape}")
    return float(initial_shares * initial_price - np.sum(captures))
