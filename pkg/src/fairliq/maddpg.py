"""Independent multi-agent DDPG on the shared liquidation market.

Each agent owns an actor, a critic, target copies of both, a replay
buffer and an exploration-noise process.  Agents interact only through
the shared price (impact of the aggregate volume) and, when enabled,
through the generalized-Gini reward adjustment applied to the joint
reward vector before storage.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

from . import analytics, fairness, rl_core
from .market import MarketEnv, MarketParams, Observation


class TrainingDivergenceError(RuntimeError):
    """A reward, loss or parameter became non-finite during training."""

    def __init__(self, message: str, episode: int, step: int):
        super().__init__(f"{message} (episode {episode}, step {step})")
        self.episode = episode
        self.step = step


@dataclass(frozen=True)
class AgentSpec:
    """One client order: size, risk-aversion level and a display label."""

    initial_shares: float
    risk_aversion: float
    label: str

    def __post_init__(self):
        if self.initial_shares <= 0:
            raise ValueError(f"initial_shares must be positive, got {self.initial_shares}")
        if self.risk_aversion < 0:
            raise ValueError(f"risk_aversion must be nonnegative, got {self.risk_aversion}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "AgentSpec":
        return cls(**data)


@dataclass
class TrainConfig:
    episodes: int = 500
    minibatch_size: int = 64
    buffer_capacity: int = 50_000
    soft_update_tau: float = 0.01
    discount: float = 0.99
    fairness_enabled: bool = False
    seed: int = 0
    actor_lr: float = 1e-4
    critic_lr: float = 1e-3
    noise_kind: str = "gaussian"
    noise_scale: float = 0.1
    noise_decay: float = 0.999
    hidden_sizes: tuple = (64, 32)
    window_length: int = 5
    tie_epsilon: float = 1e-9
    debug_checks: bool = False

    def __post_init__(self):
        if self.episodes < 1:
            raise ValueError(f"episodes must be positive, got {self.episodes}")
        if not 0.0 <= self.discount <= 1.0:
            raise ValueError(f"discount must be in [0, 1], got {self.discount}")
        if self.minibatch_size > self.buffer_capacity:
            raise ValueError(
                f"minibatch_size {self.minibatch_size} exceeds buffer capacity {self.buffer_capacity}"
            )
        if not 0.0 < self.soft_update_tau <= 1.0:
            raise ValueError(f"soft_update_tau must be in (0, 1], got {self.soft_update_tau}")
        self.hidden_sizes = tuple(int(h) for h in self.hidden_sizes)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden_sizes"] = list(self.hidden_sizes)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        return cls(**data)


class AgentRuntime:
    """Mutable learning state of one agent."""

    def __init__(self, spec: AgentSpec, config: TrainConfig, seed_seq: np.random.SeedSequence):
        obs_dim = config.window_length + 2
        init_seed, noise_seed, sample_seed = seed_seq.spawn(3)
        init_rng = np.random.default_rng(init_seed)
        self.spec = spec
        self.actor = rl_core.Mlp(
            [obs_dim, *config.hidden_sizes, 1], output_activation="sigmoid", rng=init_rng
        )
        self.critic = rl_core.Mlp(
            [obs_dim + 1, *config.hidden_sizes, 1], output_activation="identity", rng=init_rng
        )
        self.target_actor = self.actor.copy()
        self.target_critic = self.critic.copy()
        self.actor_opt = rl_core.Adam(self.actor.parameter_arrays(), config.actor_lr)
        self.critic_opt = rl_core.Adam(self.critic.parameter_arrays(), config.critic_lr)
        self.buffer = rl_core.ReplayBuffer(config.buffer_capacity, obs_dim)
        self.noise = rl_core.make_noise(
            config.noise_kind, 1, config.noise_scale, config.noise_decay, rng=noise_seed
        )
        self.sample_rng = np.random.default_rng(sample_seed)

    def networks(self) -> dict[str, rl_core.Mlp]:
        return {
            "actor": self.actor,
            "critic": self.critic,
            "target_actor": self.target_actor,
            "target_critic": self.target_critic,
        }

    def load_networks(self, nets: dict[str, rl_core.Mlp]) -> None:
        self.actor = nets["actor"]
        self.critic = nets["critic"]
        self.target_actor = nets["target_actor"]
        self.target_critic = nets["target_critic"]


def act(agent: AgentRuntime, obs, explore: bool) -> float:
    """Actor policy plus optional exploration noise, clamped to [0, 1]."""
    vec = obs.as_vector() if isinstance(obs, Observation) else np.asarray(obs, dtype=float)
    a = float(agent.actor.forward(vec)[0])
    if explore:
        a += float(agent.noise.sample()[0])
    return float(min(max(a, 0.0), 1.0))


def critic_target(agent: AgentRuntime, batch: rl_core.Batch, discount: float) -> np.ndarray:
    """Bootstrapped targets y = r + gamma * Q'(o', mu'(o')), cut at
    terminal transitions."""
    next_actions = agent.target_actor.forward(batch.next_obs)
    q_next = agent.target_critic.forward(
        np.hstack([batch.next_obs, next_actions])
    ).ravel()
    return batch.rewards + discount * q_next * (1.0 - batch.dones)


def update_critic(agent: AgentRuntime, batch: rl_core.Batch, targets: np.ndarray) -> float:
    """One mean-squared-error step on the critic; returns the pre-step loss."""
    x = np.hstack([batch.obs, batch.actions])
    q, cache = agent.critic.forward_cached(x)
    err = q.ravel() - targets
    loss = float(np.mean(err * err))
    if not np.isfinite(loss):
        raise ArithmeticError(f"critic loss is not finite ({loss})")
    upstream = (2.0 / err.size) * err[:, None]
    grads, _ = agent.critic.backward(cache, upstream)
    agent.critic_opt.step(agent.critic.parameter_arrays(), grads)
    return loss


def update_actor(agent: AgentRuntime, batch: rl_core.Batch) -> float:
    """One ascent step on mean Q(o, mu(o)); returns the pre-step objective."""
    actions, actor_cache = agent.actor.forward_cached(batch.obs)
    x = np.hstack([batch.obs, actions])
    q, critic_cache = agent.critic.forward_cached(x)
    objective = float(np.mean(q))
    if not np.isfinite(objective):
        raise ArithmeticError(f"actor objective is not finite ({objective})")
    upstream = np.full_like(q, 1.0 / q.shape[0])
    _, input_grad = agent.critic.backward(critic_cache, upstream)
    action_grad = input_grad[:, -1:]
    # descend on -J: push actions along the critic's action gradient
    grads, _ = agent.actor.backward(actor_cache, -action_grad)
    agent.actor_opt.step(agent.actor.parameter_arrays(), grads)
    return objective


@dataclass(frozen=True)
class EpisodeRecord:
    """Per-agent training metrics for one episode (currency units)."""

    episode: int
    agent: str
    raw_reward_total: float
    adjusted_reward_total: float
    realized_shortfall: float
    expected_shortfall: float
    variance: float
    noise_scale: float

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "EpisodeRecord":
        return cls(**data)


@dataclass
class TrainingLog:
    records: list = field(default_factory=list)
    reward_scales: dict = field(default_factory=dict)

    def episodes(self) -> int:
        return 1 + max((r.episode for r in self.records), default=-1)

    def for_agent(self, label: str) -> list:
        return [r for r in self.records if r.agent == label]

    def to_jsonl(self, path) -> None:
        import json

        with open(path, "w") as fh:
            for rec in self.records:
                fh.write(json.dumps(rec.to_dict(), sort_keys=True) + "\n")

    @classmethod
    def from_jsonl(cls, path) -> "TrainingLog":
        import json

        records = []
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if line:
                    records.append(EpisodeRecord.from_dict(json.loads(line)))
        return cls(records=records)


def train(
    params: MarketParams,
    agent_specs: list,
    config: TrainConfig,
    progress=None,
) -> tuple[TrainingLog, list]:
    """Run the full multi-agent training loop.

    Every step: all agents act with exploration noise, the market
    executes the joint volume, per-agent rewards are the optimal-utility
    decrements, optionally fairness-adjusted as a vector, normalized per
    agent by its notional, stored, and each agent does one critic and
    one actor update plus soft target updates once its buffer holds a
    minibatch.  Deterministic for a fixed config and seed.  Returns the
    log and the trained agent runtimes.
    """
    specs = list(agent_specs)
    if not specs:
        raise ValueError("at least one agent spec is required")
    env_branch, agent_branch = np.random.SeedSequence(config.seed).spawn(2)
    env_seeds = env_branch.spawn(config.episodes)
    agent_seeds = agent_branch.spawn(len(specs))
    agents = [AgentRuntime(spec, config, seq) for spec, seq in zip(specs, agent_seeds)]
    inventories = np.array([s.initial_shares for s in specs], dtype=float)
    env = MarketEnv(params, inventories, seed=0, window_length=config.window_length)
    weights = (
        fairness.build_weights(inventories, tie_epsilon=config.tie_epsilon)
        if config.fairness_enabled
        else None
    )
    notionals = inventories * params.initial_price
    n_trades = params.num_trades

    log = TrainingLog(
        reward_scales={s.label: float(x) for s, x in zip(specs, notionals)}
    )
    for episode in range(config.episodes):
        state = env.reset(seed=env_seeds[episode])
        obs = [env.observe(j) for j in range(len(agents))]
        obs_vecs = [o.as_vector() for o in obs]
        raw_totals = np.zeros(len(agents))
        adj_totals = np.zeros(len(agents))
        captures = [[] for _ in agents]
        sales = [[] for _ in agents]
        for t in range(n_trades):
            actions = np.array(
                [act(agent, vec, explore=True) for agent, vec in zip(agents, obs_vecs)]
            )
            prev_inventories = state.inventories
            steps_before = n_trades - t
            state, outcome = env.step(actions)
            raw = np.array(
                [
                    analytics.step_reward(
                        prev_inventories[j],
                        steps_before,
                        state.inventories[j],
                        steps_before - 1,
                        params,
                        agents[j].spec.risk_aversion,
                    )
                    for j in range(len(agents))
                ]
            )
            if not np.all(np.isfinite(raw)):
                raise TrainingDivergenceError("non-finite reward", episode, t)
            adjusted = fairness.adjust_rewards(raw, weights) if weights is not None else raw
            stored = adjusted / notionals
            raw_totals += raw
            adj_totals += adjusted
            next_obs_vecs = [env.observe(j).as_vector() for j in range(len(agents))]
            for j, agent in enumerate(agents):
                captures[j].append(float(outcome.per_agent_capture[j]))
                sales[j].append(float(outcome.executed_shares[j]))
                agent.buffer.store(
                    obs_vecs[j], actions[j], stored[j], next_obs_vecs[j], outcome.done
                )
            for agent in agents:
                if len(agent.buffer) >= config.minibatch_size:
                    batch = agent.buffer.sample(config.minibatch_size, agent.sample_rng)
                    targets = critic_target(agent, batch, config.discount)
                    try:
                        update_critic(agent, batch, targets)
                        update_actor(agent, batch)
                    except ArithmeticError as exc:
                        raise TrainingDivergenceError(str(exc), episode, t) from exc
                    rl_core.soft_update(agent.target_critic, agent.critic, config.soft_update_tau)
                    rl_core.soft_update(agent.target_actor, agent.actor, config.soft_update_tau)
                    if config.debug_checks:
                        _assert_finite_params(agent, episode, t)
            obs_vecs = next_obs_vecs
            if outcome.done:
                break
        for j, agent in enumerate(agents):
            traj = analytics.Trajectory.from_sales(
                sales[j], agent.spec.initial_shares, params.tau
            )
            log.records.append(
                EpisodeRecord(
                    episode=episode,
                    agent=agent.spec.label,
                    raw_reward_total=float(raw_totals[j]),
                    adjusted_reward_total=float(adj_totals[j]),
                    realized_shortfall=analytics.realized_shortfall(
                        captures[j], agent.spec.initial_shares, params.initial_price
                    ),
                    expected_shortfall=analytics.expected_shortfall(traj, params),
                    variance=analytics.variance(traj, params),
                    noise_scale=float(agent.noise.scale),
                )
            )
            agent.noise.end_episode()
        if progress is not None:
            progress(episode, log)
    return log, agents


def _assert_finite_params(agent: AgentRuntime, episode: int, step: int) -> None:
    for name, net in agent.networks().items():
        for arr in net.parameter_arrays():
            if not np.all(np.isfinite(arr)):
                raise TrainingDivergenceError(
                    f"non-finite parameters in {agent.spec.label}.{name}", episode, step
                )


def evaluation_rollout(
    params: MarketParams,
    agents: list,
    seed,
    window_length: int,
) -> TrainingLog:
    """Greedy (no exploration) episodes with the given agents; returns a
    one-episode log per seed entry."""
    seeds = seed if isinstance(seed, (list, tuple)) else [seed]
    specs = [a.spec for a in agents]
    inventories = np.array([s.initial_shares for s in specs], dtype=float)
    env = MarketEnv(params, inventories, seed=0, window_length=window_length)
    log = TrainingLog()
    for episode, s in enumerate(seeds):
        state = env.reset(seed=s)
        obs_vecs = [env.observe(j).as_vector() for j in range(len(agents))]
        raw_totals = np.zeros(len(agents))
        captures = [[] for _ in agents]
        sales = [[] for _ in agents]
        for t in range(params.num_trades):
            actions = np.array(
                [act(agent, vec, explore=False) for agent, vec in zip(agents, obs_vecs)]
            )
            prev_inventories = state.inventories
            steps_before = params.num_trades - t
            state, outcome = env.step(actions)
            for j in range(len(agents)):
                raw_totals[j] += analytics.step_reward(
                    prev_inventories[j],
                    steps_before,
                    state.inventories[j],
                    steps_before - 1,
                    params,
                    agents[j].spec.risk_aversion,
                )
                captures[j].append(float(outcome.per_agent_capture[j]))
                sales[j].append(float(outcome.executed_shares[j]))
            obs_vecs = [env.observe(j).as_vector() for j in range(len(agents))]
            if outcome.done:
                break
        for j, agent in enumerate(agents):
            traj = analytics.Trajectory.from_sales(
                sales[j], agent.spec.initial_shares, params.tau
            )
            log.records.append(
                EpisodeRecord(
                    episode=episode,
                    agent=agent.spec.label,
                    raw_reward_total=float(raw_totals[j]),
                    adjusted_reward_total=float(raw_totals[j]),
                    realized_shortfall=analytics.realized_shortfall(
                        captures[j], agent.spec.initial_shares, params.initial_price
                    ),
                    expected_shortfall=analytics.expected_shortfall(traj, params),
                    variance=analytics.variance(traj, params),
                    noise_scale=0.0,
                )
            )
    return log
