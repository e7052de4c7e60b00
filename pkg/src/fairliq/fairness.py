"""Generalized-Gini welfare and the fairness reward adjustment.

The welfare function sorts payoffs increasingly and pairs them with a
strictly decreasing weight vector, so the worst-off agent always gets
the largest weight.  Weights come from each agent's share of the total
selling volume; exact ties are broken by a deterministic epsilon
perturbation because strict decrease is part of the definition.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GiniWeights:
    """Rank weights (strictly decreasing, summing to 1) plus the raw
    per-agent share fractions in agent order."""

    weights: np.ndarray
    agent_share_fractions: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        f = np.asarray(self.agent_share_fractions, dtype=float)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "agent_share_fractions", f)
        if w.ndim != 1 or w.size == 0 or w.shape != f.shape:
            raise ValueError("weights and share fractions must be equal-length nonempty vectors")
        if np.any(np.diff(w) >= 0):
            raise ValueError("weights must be strictly decreasing")
        if np.any(w < 0.0) or np.any(w > 1.0):
            raise ValueError("weights must lie in [0, 1]")
        if not np.isclose(np.sum(w), 1.0, rtol=0, atol=1e-12):
            raise ValueError(f"weights must sum to 1, got {np.sum(w)}")

    @property
    def num_agents(self) -> int:
        return self.weights.size


def build_weights(initial_shares, tie_epsilon: float = 1e-9) -> GiniWeights:
    """Weight vector from order sizes: fractions of the total volume,
    sorted decreasing, with ties separated by ``tie_epsilon`` steps and
    renormalized."""
    shares = np.asarray(initial_shares, dtype=float)
    if shares.ndim != 1 or shares.size == 0:
        raise ValueError("initial_shares must be a nonempty vector")
    if np.any(shares <= 0):
        raise ValueError("initial_shares must all be positive")
    if tie_epsilon < 0:
        raise ValueError(f"tie_epsilon must be nonnegative, got {tie_epsilon}")

    fractions = shares / np.sum(shares)
    ranked = np.sort(fractions)[::-1].copy()
    # strict-decrease repair: exact ties step down by tie_epsilon each,
    # and a run's cascade pushes past any nearly-tied neighbor below it
    for i in range(1, ranked.size):
        ranked[i] = min(ranked[i], ranked[i - 1] - tie_epsilon)
    ranked = ranked / np.sum(ranked)
    if np.any(np.diff(ranked) >= 0):
        raise ValueError(
            "weights are not strictly decreasing after tie-breaking; "
            "increase tie_epsilon"
        )
    return GiniWeights(weights=ranked, agent_share_fractions=fractions)


def ggi(payoffs, weights: GiniWeights) -> float:
    """Generalized Gini Index: payoffs sorted increasingly, dotted with
    the decreasing weights (largest weight on the smallest payoff)."""
    v = np.asarray(payoffs, dtype=float)
    if v.shape != weights.weights.shape:
        raise ValueError(
            f"payoffs shape {v.shape} does not match {weights.num_agents} weights"
        )
    return float(np.dot(np.sort(v), weights.weights))


def adjust_rewards(rewards, weights: GiniWeights) -> np.ndarray:
    """Fairness adjustment: subtract from each agent its own share
    fraction times the group welfare of the current rewards."""
    r = np.asarray(rewards, dtype=float)
    if r.shape != weights.agent_share_fractions.shape:
        raise ValueError(
            f"rewards shape {r.shape} does not match {weights.num_agents} agents"
        )
    return r - weights.agent_share_fractions * ggi(r, weights)
