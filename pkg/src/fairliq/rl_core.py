"""Neural substrate for the DDPG agents.

Fixed-topology fully connected networks with rectified-linear hidden
layers and hand-written reverse-mode gradients, an adaptive-moment
optimizer, soft target updates, a ring-buffer replay memory and
exploration noise.  Everything is plain float64 numpy so training runs
are bit-reproducible from a seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

OUTPUT_ACTIVATIONS = ("identity", "sigmoid")


class BufferNotReadyError(RuntimeError):
    """Sampling was requested before the buffer held a full minibatch."""


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class Mlp:
    """Multilayer perceptron with relu hidden layers.

    ``output_activation`` is "identity" for critics and "sigmoid" for
    actors, which pins actions into (0, 1) structurally.  Weights are
    stored as (fan_out, fan_in) matrices.
    """

    def __init__(self, layer_sizes, output_activation: str = "identity", rng=None):
        sizes = [int(s) for s in layer_sizes]
        if len(sizes) < 2 or any(s < 1 for s in sizes):
            raise ValueError(f"layer_sizes needs >= 2 positive entries, got {layer_sizes}")
        if output_activation not in OUTPUT_ACTIVATIONS:
            raise ValueError(f"output_activation must be one of {OUTPUT_ACTIVATIONS}")
        self.layer_sizes = sizes
        self.output_activation = output_activation
        rng = np.random.default_rng(rng)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        last = len(sizes) - 2
        for i, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            if i == last:
                # small final layer so initial outputs sit near 0 / 0.5
                w = rng.uniform(-3e-3, 3e-3, size=(n_out, n_in))
            else:
                w = rng.normal(0.0, np.sqrt(2.0 / n_in), size=(n_out, n_in))
            self.weights.append(w)
            self.biases.append(np.zeros(n_out))

    @property
    def num_layers(self) -> int:
        return len(self.weights)

    def parameter_arrays(self) -> list[np.ndarray]:
        """Live references, alternating weight/bias per layer."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def copy(self) -> "Mlp":
        clone = Mlp.__new__(Mlp)
        clone.layer_sizes = list(self.layer_sizes)
        clone.output_activation = self.output_activation
        clone.weights = [w.copy() for w in self.weights]
        clone.biases = [b.copy() for b in self.biases]
        return clone

    def _check_input(self, x) -> tuple[np.ndarray, bool]:
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        if single:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.layer_sizes[0]:
            raise ValueError(
                f"input shape {x.shape} incompatible with first layer size {self.layer_sizes[0]}"
            )
        return x, single

    def forward(self, x) -> np.ndarray:
        x2, single = self._check_input(x)
        h = x2
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w.T + b
            if i < self.num_layers - 1:
                h = np.maximum(z, 0.0)
            elif self.output_activation == "sigmoid":
                h = _sigmoid(z)
            else:
                h = z
        return h[0] if single else h

    def forward_cached(self, x):
        """Forward pass keeping layer inputs and pre-activations for
        backward()."""
        x2, single = self._check_input(x)
        inputs = [x2]
        zs = []
        h = x2
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w.T + b
            zs.append(z)
            if i < self.num_layers - 1:
                h = np.maximum(z, 0.0)
            elif self.output_activation == "sigmoid":
                h = _sigmoid(z)
            else:
                h = z
            inputs.append(h)
        cache = (inputs, zs, single)
        return (h[0] if single else h), cache

    def backward(self, cache, upstream) -> tuple[list[np.ndarray], np.ndarray]:
        """Exact gradients of the cached forward pass.

        ``upstream`` holds d(loss)/d(output); returns gradients in
        ``parameter_arrays()`` order (summed over the batch) plus the
        gradient w.r.t. the input batch.
        """
        inputs, zs, single = cache
        delta = np.asarray(upstream, dtype=float)
        if single:
            delta = delta[None, :]
        if delta.shape != zs[-1].shape:
            raise ValueError(
                f"upstream gradient shape {delta.shape} does not match output {zs[-1].shape}"
            )
        if self.output_activation == "sigmoid":
            s = _sigmoid(zs[-1])
            delta = delta * s * (1.0 - s)
        grads: list[np.ndarray] = [np.empty(0)] * (2 * self.num_layers)
        for i in range(self.num_layers - 1, -1, -1):
            grads[2 * i] = delta.T @ inputs[i]
            grads[2 * i + 1] = delta.sum(axis=0)
            delta = delta @ self.weights[i]
            if i > 0:
                delta = delta * (zs[i - 1] > 0.0)
        return grads, (delta[0] if single else delta)


class Adam:
    """Adaptive-moment estimation with bias correction."""

    def __init__(self, params: list[np.ndarray], learning_rate: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        if len(params) != len(self.m) or len(grads) != len(params):
            raise ValueError("parameter/gradient lists do not match optimizer state")
        for i, g in enumerate(grads):
            if not np.all(np.isfinite(g)):
                raise ArithmeticError(
                    f"non-finite gradient in parameter block {i} "
                    f"(shape {g.shape}, {np.count_nonzero(~np.isfinite(g))} bad entries)"
                )
        self.t += 1
        b1c = 1.0 - self.beta1**self.t
        b2c = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.learning_rate * (m / b1c) / (np.sqrt(v / b2c) + self.eps)


def soft_update(target: Mlp, online: Mlp, tau: float) -> None:
    """Move target parameters toward online ones: t <- tau*o + (1-tau)*t."""
    if not 0.0 < tau <= 1.0:
        raise ValueError(f"tau must be in (0, 1], got {tau}")
    for t, o in zip(target.parameter_arrays(), online.parameter_arrays()):
        t *= 1.0 - tau
        t += tau * o


@dataclass(frozen=True)
class Batch:
    obs: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_obs: np.ndarray
    dones: np.ndarray


class ReplayBuffer:
    """Fixed-capacity ring buffer of transitions; uniform sampling with
    replacement."""

    def __init__(self, capacity: int, obs_dim: int, action_dim: int = 1):
        if capacity < 1:
            raise ValueError(f"capacity must be positive, got {capacity}")
        self.capacity = int(capacity)
        self._obs = np.zeros((capacity, obs_dim))
        self._actions = np.zeros((capacity, action_dim))
        self._rewards = np.zeros(capacity)
        self._next_obs = np.zeros((capacity, obs_dim))
        self._dones = np.zeros(capacity)
        self._cursor = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def store(self, obs, action, reward: float, next_obs, done: bool) -> None:
        i = self._cursor
        self._obs[i] = obs
        self._actions[i] = action
        self._rewards[i] = reward
        self._next_obs[i] = next_obs
        self._dones[i] = float(done)
        self._cursor = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, minibatch_size: int, rng: np.random.Generator) -> Batch:
        if self._size < minibatch_size:
            raise BufferNotReadyError(
                f"buffer holds {self._size} transitions, need {minibatch_size}"
            )
        idx = rng.integers(0, self._size, size=minibatch_size)
        return Batch(
            obs=self._obs[idx],
            actions=self._actions[idx],
            rewards=self._rewards[idx],
            next_obs=self._next_obs[idx],
            dones=self._dones[idx],
        )


class GaussianNoise:
    """Uncorrelated exploration noise with per-episode scale decay."""

    kind = "gaussian"

    def __init__(self, dim: int, scale: float, decay: float, rng=None):
        _check_noise_params(scale, decay)
        self.dim = dim
        self.scale = scale
        self.decay = decay
        self._rng = np.random.default_rng(rng)

    def sample(self) -> np.ndarray:
        return self.scale * self._rng.standard_normal(self.dim)

    def end_episode(self) -> None:
        self.scale *= self.decay


class OrnsteinUhlenbeckNoise:
    """Mean-reverting exploration noise; state resets each episode."""

    kind = "ou"

    def __init__(self, dim: int, scale: float, decay: float,
                 theta: float = 0.15, sigma: float = 0.2, rng=None):
        _check_noise_params(scale, decay)
        self.dim = dim
        self.scale = scale
        self.decay = decay
        self.theta = theta
        self.sigma = sigma
        self._rng = np.random.default_rng(rng)
        self.state = np.zeros(dim)

    def sample(self) -> np.ndarray:
        self.state = self.state + self.theta * -self.state + self.sigma * self._rng.standard_normal(self.dim)
        return self.scale * self.state

    def end_episode(self) -> None:
        self.scale *= self.decay
        self.state = np.zeros(self.dim)


def _check_noise_params(scale: float, decay: float) -> None:
    if scale < 0:
        raise ValueError(f"noise scale must be nonnegative, got {scale}")
    if not 0.0 < decay <= 1.0:
        raise ValueError(f"noise decay must be in (0, 1], got {decay}")


def make_noise(kind: str, dim: int, scale: float, decay: float, rng=None, **kwargs):
    if kind == "gaussian":
        return GaussianNoise(dim, scale, decay, rng=rng, **kwargs)
    if kind == "ou":
        return OrnsteinUhlenbeckNoise(dim, scale, decay, rng=rng, **kwargs)
    raise ValueError(f"unknown noise kind {kind!r}; expected 'gaussian' or 'ou'")


CHECKPOINT_FORMAT = "fairliq-networks"
CHECKPOINT_VERSION = 1


def save_networks(path, networks: dict[str, Mlp]) -> None:
    """Write named networks to a JSON checkpoint.

    Plain-text floats round-trip bit-exactly through repr, so a
    save/load cycle restores parameters identical to the last bit.
    """
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "networks": {
            name: {
                "layer_sizes": net.layer_sizes,
                "output_activation": net.output_activation,
                "weights": [w.tolist() for w in net.weights],
                "biases": [b.tolist() for b in net.biases],
            }
            for name, net in networks.items()
        },
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=1) + "\n")


def load_networks(path) -> dict[str, Mlp]:
    payload = json.loads(Path(path).read_text())
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path} is not a {CHECKPOINT_FORMAT} checkpoint")
    out: dict[str, Mlp] = {}
    for name, spec in payload["networks"].items():
        net = Mlp.__new__(Mlp)
        net.layer_sizes = [int(s) for s in spec["layer_sizes"]]
        net.output_activation = spec["output_activation"]
        net.weights = [np.asarray(w, dtype=float) for w in spec["weights"]]
        net.biases = [np.asarray(b, dtype=float) for b in spec["biases"]]
        out[name] = net
    return out
