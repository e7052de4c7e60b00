"""Multi-agent Almgren-Chriss market environment.

The environment advances an arithmetic random-walk price under linear
permanent and temporary impact of the *aggregate* volume sold by all
agents in a step, tracks per-agent inventories, and hands each agent a
partial observation (log-return window, trades-remaining fraction, own
inventory fraction).  All agents trade simultaneously within a step and
receive the same execution price.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class ParameterError(ValueError):
    """A market or solver parameter violates its invariant."""


class ActionError(ValueError):
    """A raw action is outside the allowed [0, 1] range."""


class EpisodeOverError(RuntimeError):
    """step() was called on a finished episode."""


@dataclass(frozen=True)
class MarketParams:
    """Impact-model constants for one liquidation problem.

    Units: prices in currency/share, volumes in shares, time in days.
    ``sigma_step`` is the absolute per-step price volatility in
    currency/share/sqrt(day); ``eta`` is currency*day/share^2 and
    ``gamma`` currency/share^2.
    """

    initial_price: float
    horizon_days: float
    num_trades: int
    epsilon: float
    eta: float
    gamma: float
    sigma_step: float
    annual_volatility_fraction: float = 0.2
    bid_ask_spread: float = 0.125
    daily_volume: float = 5e7
    trading_days_per_year: int = 250

    def __post_init__(self) -> None:
        if self.num_trades < 1 or int(self.num_trades) != self.num_trades:
            raise ParameterError(f"num_trades must be a positive integer, got {self.num_trades}")
        if self.horizon_days <= 0:
            raise ParameterError(f"horizon_days must be positive, got {self.horizon_days}")
        if self.initial_price <= 0:
            raise ParameterError(f"initial_price must be positive, got {self.initial_price}")
        for name in ("sigma_step", "eta", "gamma", "epsilon"):
            value = getattr(self, name)
            if value < 0:
                raise ParameterError(f"{name} must be nonnegative, got {value}")
        if self.convexity_adjusted_eta <= 0:
            raise ParameterError(
                "eta - gamma*tau/2 must be positive for a convex cost "
                f"(eta={self.eta}, gamma={self.gamma}, tau={self.tau})"
            )

    @property
    def tau(self) -> float:
        """Days per trade, horizon_days / num_trades."""
        return self.horizon_days / self.num_trades

    @property
    def convexity_adjusted_eta(self) -> float:
        """eta - gamma*tau/2, the coefficient of the quadratic cost term."""
        return self.eta - self.gamma * self.tau / 2.0

    def to_dict(self) -> dict:
        return {
            "initial_price": self.initial_price,
            "horizon_days": self.horizon_days,
            "num_trades": self.num_trades,
            "tau": self.tau,
            "epsilon": self.epsilon,
            "eta": self.eta,
            "gamma": self.gamma,
            "sigma_step": self.sigma_step,
            "annual_volatility_fraction": self.annual_volatility_fraction,
            "bid_ask_spread": self.bid_ask_spread,
            "daily_volume": self.daily_volume,
            "trading_days_per_year": self.trading_days_per_year,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MarketParams":
        data = dict(data)
        data.pop("tau", None)  # derived, never trusted from disk
        return cls(**data)


@dataclass
class MarketState:
    """Full environment state; lives inside the environment only."""

    step_index: int
    price: float
    log_return_window: np.ndarray
    inventories: np.ndarray
    initial_inventories: np.ndarray

    def to_dict(self) -> dict:
        return {
            "step_index": self.step_index,
            "price": self.price,
            "log_return_window": self.log_return_window.tolist(),
            "inventories": self.inventories.tolist(),
            "initial_inventories": self.initial_inventories.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MarketState":
        return cls(
            step_index=int(data["step_index"]),
            price=float(data["price"]),
            log_return_window=np.asarray(data["log_return_window"], dtype=float),
            inventories=np.asarray(data["inventories"], dtype=float),
            initial_inventories=np.asarray(data["initial_inventories"], dtype=float),
        )


@dataclass(frozen=True)
class Observation:
    """What a single agent is allowed to see: market info plus its own
    inventory fraction, never other agents'."""

    log_return_window: np.ndarray
    trades_remaining_fraction: float
    own_inventory_fraction: float

    def as_vector(self) -> np.ndarray:
        return np.concatenate(
            [
                self.log_return_window,
                [self.trades_remaining_fraction, self.own_inventory_fraction],
            ]
        )


@dataclass(frozen=True)
class StepOutcome:
    executed_shares: np.ndarray
    execution_price: float
    new_price: float
    per_agent_capture: np.ndarray
    done: bool


_NOISE_DISTRIBUTIONS = ("normal", "uniform")


class MarketEnv:
    """Almgren-Chriss simulation for ``J`` simultaneously selling agents.

    Single-threaded state machine; all randomness flows from the
    per-instance generator seeded at reset.  ``noise_dist`` selects the
    distribution of the unit-variance price shock (``"uniform"`` is
    U(-sqrt(3), sqrt(3))).
    """

    def __init__(
        self,
        params: MarketParams,
        initial_inventories,
        seed=None,
        window_length: int = 5,
        noise_dist: str = "normal",
    ):
        inventories = np.asarray(initial_inventories, dtype=float)
        if inventories.ndim != 1 or inventories.size == 0:
            raise ParameterError("initial_inventories must be a nonempty 1-d vector")
        if np.any(inventories <= 0):
            raise ParameterError("initial_inventories must all be positive")
        if window_length < 1:
            raise ParameterError(f"window_length must be >= 1, got {window_length}")
        if noise_dist not in _NOISE_DISTRIBUTIONS:
            raise ParameterError(f"noise_dist must be one of {_NOISE_DISTRIBUTIONS}")
        self.params = params
        self.window_length = int(window_length)
        self.noise_dist = noise_dist
        self._initial_inventories = inventories
        self._rng = np.random.default_rng(seed)
        self.reset(seed=seed)

    @property
    def num_agents(self) -> int:
        return self._initial_inventories.size

    @property
    def done(self) -> bool:
        return bool(
            self._step_index >= self.params.num_trades or np.all(self._inventories == 0.0)
        )

    @property
    def state(self) -> MarketState:
        return MarketState(
            step_index=self._step_index,
            price=self._price,
            log_return_window=self._window.copy(),
            inventories=self._inventories.copy(),
            initial_inventories=self._initial_inventories.copy(),
        )

    def reset(self, seed=None) -> MarketState:
        if seed is not None:
            self._rng = np.random.default_rng(seed)
        self._step_index = 0
        self._price = float(self.params.initial_price)
        self._window = np.zeros(self.window_length)
        self._inventories = self._initial_inventories.copy()
        return self.state

    def _draw_noise(self) -> float:
        if self.noise_dist == "normal":
            return float(self._rng.standard_normal())
        return float(self._rng.uniform(-math.sqrt(3.0), math.sqrt(3.0)))

    def step(self, actions, noise_draw: float | None = None) -> tuple[MarketState, StepOutcome]:
        """Execute one trade for every agent.

        ``actions`` are selling fractions in [0, 1]; shares sold are
        ``a_j * x_j`` (the final step liquidates everything regardless of
        the action).  ``noise_draw`` injects the unit-variance price
        shock, bypassing the generator.
        """
        p = self.params
        if self.done:
            raise EpisodeOverError(
                f"episode finished at step {self._step_index}; call reset() first"
            )
        actions = np.asarray(actions, dtype=float)
        if actions.shape != (self.num_agents,):
            raise ValueError(
                f"expected {self.num_agents} actions, got shape {actions.shape}"
            )
        bad = np.where((actions < 0.0) | (actions > 1.0) | ~np.isfinite(actions))[0]
        if bad.size:
            j = int(bad[0])
            raise ActionError(f"action[{j}]={actions[j]} outside [0, 1]")

        prev_price = self._price
        final_step = self._step_index == p.num_trades - 1
        if final_step:
            executed = self._inventories.copy()
        else:
            executed = np.minimum(actions * self._inventories, self._inventories)
        total = float(np.sum(executed))
        rate = total / p.tau

        xi = self._draw_noise() if noise_draw is None else float(noise_draw)
        # permanent impact g(v) = gamma * v enters the price path; temporary
        # impact h(v) = eps*sgn + (eta/tau)*n only the execution price
        new_price = prev_price + p.sigma_step * math.sqrt(p.tau) * xi - p.tau * (p.gamma * rate)
        execution_price = prev_price - (
            p.epsilon * float(np.sign(total)) + (p.eta / p.tau) * total
        )
        if new_price <= 0.0:
            raise FloatingPointError(
                f"price became nonpositive ({new_price}) at step {self._step_index + 1}; "
                "volatility/impact parameters are out of the model's domain"
            )

        captures = executed * execution_price
        if final_step:
            self._inventories = np.zeros_like(self._inventories)
        else:
            self._inventories = self._inventories - executed
        self._price = new_price
        self._window = np.concatenate([self._window[1:], [math.log(new_price / prev_price)]])
        self._step_index += 1

        outcome = StepOutcome(
            executed_shares=executed,
            execution_price=execution_price,
            new_price=new_price,
            per_agent_capture=captures,
            done=self.done,
        )
        return self.state, outcome

    def observe(self, agent_index: int) -> Observation:
        if not 0 <= agent_index < self.num_agents:
            raise IndexError(
                f"agent_index {agent_index} out of range for {self.num_agents} agents"
            )
        p = self.params
        return Observation(
            log_return_window=self._window.copy(),
            trades_remaining_fraction=(p.num_trades - self._step_index) / p.num_trades,
            own_inventory_fraction=float(
                self._inventories[agent_index] / self._initial_inventories[agent_index]
            ),
        )
