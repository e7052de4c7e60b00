"""Fairness-aware multi-agent liquidation: an Almgren-Chriss market with
independent DDPG selling agents and a generalized-Gini reward adjustment."""

from .analytics import (
    Trajectory,
    UtilityBreakdown,
    expected_shortfall,
    optimal_trajectory,
    realized_shortfall,
    step_reward,
    utility,
    variance,
)
from .fairness import GiniWeights, adjust_rewards, build_weights, ggi
from .maddpg import AgentSpec, TrainConfig, TrainingLog, train
from .market import MarketEnv, MarketParams, MarketState, Observation, StepOutcome
from .experiment import (
    ComparisonReport,
    MetricsSummary,
    Scenario,
    analytical_baseline,
    desk_scenario,
    paper_scenario,
    run_comparison,
)

__version__ = "0.1.0"

__all__ = [
    "AgentSpec",
    "ComparisonReport",
    "GiniWeights",
    "MarketEnv",
    "MarketParams",
    "MarketState",
    "MetricsSummary",
    "Observation",
    "Scenario",
    "StepOutcome",
    "TrainConfig",
    "TrainingLog",
    "Trajectory",
    "UtilityBreakdown",
    "adjust_rewards",
    "analytical_baseline",
    "build_weights",
    "desk_scenario",
    "expected_shortfall",
    "ggi",
    "optimal_trajectory",
    "paper_scenario",
    "realized_shortfall",
    "run_comparison",
    "step_reward",
    "train",
    "utility",
    "variance",
]
