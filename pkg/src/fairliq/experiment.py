"""Scenario definitions, metric aggregation and comparison experiments.

A scenario bundles market constants, the client order book and the
training configuration; the comparison experiment trains the plain and
the fairness-adjusted variant on identical seeds and summarizes
convergence and per-agent distribution metrics.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import analytics
from .maddpg import AgentSpec, TrainConfig, TrainingLog, train
from .market import MarketEnv, MarketParams

SCENARIO_SCHEMA_VERSION = 1

_SCENARIO_KEYS = {
    "schema_version",
    "name",
    "market",
    "agents",
    "train",
    "replication_seeds",
    "metrics_window",
}


class ScenarioError(ValueError):
    """A scenario file or dictionary does not match the schema."""


@dataclass
class Scenario:
    name: str
    market: MarketParams
    agents: list
    train: TrainConfig
    replication_seeds: list
    metrics_window: int = 100

    def to_dict(self) -> dict:
        return {
            "schema_version": SCENARIO_SCHEMA_VERSION,
            "name": self.name,
            "market": self.market.to_dict(),
            "agents": [a.to_dict() for a in self.agents],
            "train": self.train.to_dict(),
            "replication_seeds": list(self.replication_seeds),
            "metrics_window": self.metrics_window,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        if not isinstance(data, dict):
            raise ScenarioError(f"scenario must be a mapping, got {type(data).__name__}")
        unknown = set(data) - _SCENARIO_KEYS
        if unknown:
            raise ScenarioError(f"unknown scenario keys: {sorted(unknown)}")
        missing = _SCENARIO_KEYS - set(data)
        if missing:
            raise ScenarioError(f"missing scenario keys: {sorted(missing)}")
        if data["schema_version"] != SCENARIO_SCHEMA_VERSION:
            raise ScenarioError(
                f"unsupported schema_version {data['schema_version']}, "
                f"expected {SCENARIO_SCHEMA_VERSION}"
            )
        try:
            return cls(
                name=str(data["name"]),
                market=MarketParams.from_dict(data["market"]),
                agents=[AgentSpec.from_dict(a) for a in data["agents"]],
                train=TrainConfig.from_dict(data["train"]),
                replication_seeds=[int(s) for s in data["replication_seeds"]],
                metrics_window=int(data["metrics_window"]),
            )
        except (TypeError, ValueError) as exc:
            raise ScenarioError(f"invalid scenario contents: {exc}") from exc

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "Scenario":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioError(
                f"{path} is not valid JSON: {exc.msg} at line {exc.lineno} column {exc.colno}"
            ) from exc
        return cls.from_dict(data)


def _daily_volatility_fraction() -> float:
    # the headline 20% annual figure maps to 0.12/sqrt(250) per day under
    # the model's own calibration arithmetic
    return 0.12 / math.sqrt(250.0)


def paper_scenario() -> Scenario:
    """Six-client desk: 500k/500k/100k/100k/20k/20k shares over 60 days,
    240 trades, shared risk aversion 1e-4."""
    initial_price = 50.0
    daily_volume = 5e7
    spread = 0.125
    market = MarketParams(
        initial_price=initial_price,
        horizon_days=60.0,
        num_trades=240,
        epsilon=spread / 2.0,
        eta=spread / (0.01 * daily_volume),
        gamma=spread / (0.1 * daily_volume),
        sigma_step=_daily_volatility_fraction() * initial_price,
        annual_volatility_fraction=0.2,
        bid_ask_spread=spread,
        daily_volume=daily_volume,
        trading_days_per_year=250,
    )
    shares = [500_000, 500_000, 100_000, 100_000, 20_000, 20_000]
    agents = [
        AgentSpec(initial_shares=float(x), risk_aversion=1e-4, label=f"client-{i + 1}")
        for i, x in enumerate(shares)
    ]
    config = TrainConfig(
        episodes=2000,
        minibatch_size=128,
        buffer_capacity=200_000,
        noise_decay=0.999,
    )
    return Scenario(
        name="paper",
        market=market,
        agents=agents,
        train=config,
        replication_seeds=[1, 2, 3],
        metrics_window=100,
    )


def desk_scenario() -> Scenario:
    """Scaled-down reproduction that trains in minutes: 30 daily trades,
    orders of 5000/5000/1000/1000/200/200 shares, and the impact
    coefficients recalibrated to the proportionally smaller daily volume
    by the same percent-of-volume rules."""
    initial_price = 50.0
    daily_volume = 5e5
    spread = 0.125
    market = MarketParams(
        initial_price=initial_price,
        horizon_days=30.0,
        num_trades=30,
        epsilon=spread / 2.0,
        eta=spread / (0.01 * daily_volume),
        gamma=spread / (0.1 * daily_volume),
        sigma_step=_daily_volatility_fraction() * initial_price,
        annual_volatility_fraction=0.2,
        bid_ask_spread=spread,
        daily_volume=daily_volume,
        trading_days_per_year=250,
    )
    shares = [5000, 5000, 1000, 1000, 200, 200]
    agents = [
        AgentSpec(initial_shares=float(x), risk_aversion=1e-4, label=f"client-{i + 1}")
        for i, x in enumerate(shares)
    ]
    config = TrainConfig(
        episodes=1000,
        minibatch_size=64,
        buffer_capacity=50_000,
        noise_scale=0.1,
        noise_decay=0.995,
    )
    return Scenario(
        name="desk",
        market=market,
        agents=agents,
        train=config,
        replication_seeds=[1, 2, 3, 4, 5],
        metrics_window=100,
    )


@dataclass
class MetricsSummary:
    """Per-agent trailing-window metrics plus exact totals."""

    agent_labels: list
    initial_shares: list
    mean_realized_shortfall: list
    mean_variance: list
    per_share_shortfall: list
    total_shortfall: float
    total_variance: float
    pair_dispersion: dict
    per_share_std: float

    def to_dict(self) -> dict:
        return {
            "agent_labels": list(self.agent_labels),
            "initial_shares": list(self.initial_shares),
            "mean_realized_shortfall": list(self.mean_realized_shortfall),
            "mean_variance": list(self.mean_variance),
            "per_share_shortfall": list(self.per_share_shortfall),
            "total_shortfall": self.total_shortfall,
            "total_variance": self.total_variance,
            "pair_dispersion": dict(self.pair_dispersion),
            "per_share_std": self.per_share_std,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MetricsSummary":
        return cls(**data)


def equal_size_pairs(agents: list) -> list:
    """Indices of consecutive same-order-size agents, the within-group
    comparisons of interest."""
    pairs = []
    by_size: dict = {}
    for i, spec in enumerate(agents):
        by_size.setdefault(spec.initial_shares, []).append(i)
    for size in sorted(by_size, reverse=True):
        group = by_size[size]
        for a, b in zip(group[:-1], group[1:]):
            pairs.append((a, b))
    return pairs


def _summarize(agents: list, shortfalls: np.ndarray, variances: np.ndarray) -> MetricsSummary:
    """Build the summary from per-agent mean metrics."""
    labels = [a.label for a in agents]
    shares = np.array([a.initial_shares for a in agents], dtype=float)
    per_share = shortfalls / shares
    dispersion = {}
    for i, j in equal_size_pairs(agents):
        dispersion[f"{labels[i]}|{labels[j]}"] = float(abs(per_share[i] - per_share[j]))
    return MetricsSummary(
        agent_labels=labels,
        initial_shares=shares.tolist(),
        mean_realized_shortfall=shortfalls.tolist(),
        mean_variance=variances.tolist(),
        per_share_shortfall=per_share.tolist(),
        total_shortfall=float(np.sum(shortfalls)),
        total_variance=float(np.sum(variances)),
        pair_dispersion=dispersion,
        per_share_std=float(np.std(per_share)),
    )


def summarize_log(log: TrainingLog, agents: list, window: int = 100) -> MetricsSummary:
    """Trailing-window means of realized shortfall and schedule variance
    per agent."""
    episodes = log.episodes()
    start = max(0, episodes - window)
    shortfalls = np.zeros(len(agents))
    variances = np.zeros(len(agents))
    for k, spec in enumerate(agents):
        recs = [r for r in log.for_agent(spec.label) if r.episode >= start]
        if not recs:
            raise ValueError(f"no records for agent {spec.label!r} in the trailing window")
        shortfalls[k] = float(np.mean([r.realized_shortfall for r in recs]))
        variances[k] = float(np.mean([r.variance for r in recs]))
    return _summarize(agents, shortfalls, variances)


def convergence_series(log: TrainingLog, agents: list) -> tuple[list, list, list]:
    """Per-episode totals across agents: (episodes, shortfall, variance)."""
    episodes = log.episodes()
    shortfall = np.zeros(episodes)
    variance = np.zeros(episodes)
    for rec in log.records:
        shortfall[rec.episode] += rec.realized_shortfall
        variance[rec.episode] += rec.variance
    return list(range(episodes)), shortfall.tolist(), variance.tolist()


def analytical_baseline(scenario: Scenario) -> MetricsSummary:
    """Reference execution: every agent independently follows its own
    single-agent optimal schedule, all executed together in the shared
    market with the price noise switched off.

    Planning ignores the other agents' impact, so this is a
    lower-bound-flavored reference rather than the joint optimum.
    """
    params = scenario.market
    n = params.num_trades
    plans = [
        analytics.optimal_trajectory(a.initial_shares, n, params, a.risk_aversion)
        for a in scenario.agents
    ]
    inventories = np.array([a.initial_shares for a in scenario.agents], dtype=float)
    env = MarketEnv(params, inventories, seed=0, window_length=scenario.train.window_length)
    env.reset(seed=0)
    captures = [[] for _ in scenario.agents]
    sales = [[] for _ in scenario.agents]
    state = env.state
    for t in range(n):
        actions = []
        for j, plan in enumerate(plans):
            held = state.inventories[j]
            actions.append(0.0 if held <= 0 else min(plan.sales[t] / held, 1.0))
        state, outcome = env.step(np.array(actions), noise_draw=0.0)
        for j in range(len(plans)):
            captures[j].append(float(outcome.per_agent_capture[j]))
            sales[j].append(float(outcome.executed_shares[j]))
    shortfalls = np.array(
        [
            analytics.realized_shortfall(captures[j], a.initial_shares, params.initial_price)
            for j, a in enumerate(scenario.agents)
        ]
    )
    variances = np.array(
        [
            analytics.variance(
                analytics.Trajectory.from_sales(sales[j], a.initial_shares, params.tau),
                params,
            )
            for j, a in enumerate(scenario.agents)
        ]
    )
    return _summarize(scenario.agents, shortfalls, variances)


@dataclass
class RunResult:
    """One trained variant on one seed, with its convergence series."""

    variant: str
    seed: int
    summary: MetricsSummary
    episodes: list
    episode_total_shortfall: list
    episode_total_variance: list

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "seed": self.seed,
            "summary": self.summary.to_dict(),
            "episodes": list(self.episodes),
            "episode_total_shortfall": list(self.episode_total_shortfall),
            "episode_total_variance": list(self.episode_total_variance),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunResult":
        return cls(
            variant=data["variant"],
            seed=data["seed"],
            summary=MetricsSummary.from_dict(data["summary"]),
            episodes=data["episodes"],
            episode_total_shortfall=data["episode_total_shortfall"],
            episode_total_variance=data["episode_total_variance"],
        )


@dataclass
class ComparisonReport:
    scenario_name: str
    window: int
    runs: list = field(default_factory=list)

    def runs_for(self, variant: str) -> list:
        return [r for r in self.runs if r.variant == variant]

    def to_dict(self) -> dict:
        return {
            "scenario_name": self.scenario_name,
            "window": self.window,
            "runs": [r.to_dict() for r in self.runs],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ComparisonReport":
        return cls(
            scenario_name=data["scenario_name"],
            window=data["window"],
            runs=[RunResult.from_dict(r) for r in data["runs"]],
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "ComparisonReport":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


VARIANTS = ("plain", "ggi")


def _comparison_run(scenario: Scenario, variant: str, seed: int) -> RunResult:
    config = replace(scenario.train, fairness_enabled=(variant == "ggi"), seed=int(seed))
    log, _ = train(scenario.market, scenario.agents, config)
    episodes, shortfall, var_series = convergence_series(log, scenario.agents)
    summary = summarize_log(log, scenario.agents, window=scenario.metrics_window)
    return RunResult(
        variant=variant,
        seed=int(seed),
        summary=summary,
        episodes=episodes,
        episode_total_shortfall=shortfall,
        episode_total_variance=var_series,
    )


def run_comparison(scenario: Scenario, seeds=None, progress=None, workers: int = 1) -> ComparisonReport:
    """Train the plain and the fairness-adjusted variant on every seed
    (same seeds for both, so the comparison is paired) and collect
    convergence plus distribution metrics.

    Runs are independent and seed-deterministic, so ``workers > 1``
    executes them in parallel processes with identical results; the
    report always lists runs in (seed, variant) order.
    """
    seeds = list(scenario.replication_seeds if seeds is None else seeds)
    if not seeds:
        raise ValueError("at least one seed is required")
    jobs = [(variant, int(seed)) for seed in seeds for variant in VARIANTS]
    report = ComparisonReport(scenario_name=scenario.name, window=scenario.metrics_window)
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {
                (variant, seed): pool.submit(_comparison_run, scenario, variant, seed)
                for variant, seed in jobs
            }
            results = {key: fut.result() for key, fut in futures.items()}
    else:
        results = {}
        for variant, seed in jobs:
            results[(variant, seed)] = _comparison_run(scenario, variant, seed)
            if progress is not None:
                progress(variant, seed, results[(variant, seed)].summary)
    for variant, seed in jobs:
        run = results[(variant, seed)]
        report.runs.append(run)
        if progress is not None and workers > 1:
            progress(variant, seed, run.summary)
    return report
