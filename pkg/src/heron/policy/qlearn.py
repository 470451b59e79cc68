"""DQN-style Q-learning with a replay buffer and a periodically synced target net."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..core import InvalidInputError
from ..nn import AdamState, MlpParams, MlpSpec, backward, forward, forward_cached, init_params, optimizer_step


class ReplayBuffer:
    """Fixed-capacity FIFO of transitions stored column-wise.

    Besides (obs, action, next_obs, done) every row keeps the raw feedback
    signals, the ground-truth reward and a per-row scaling exponent so any
    reward source can be evaluated at sample time.
    """

    def __init__(self, capacity: int, obs_dim: int, num_signals: int):
        if capacity < 1:
            raise InvalidInputError("capacity must be positive")
        self.capacity = capacity
        self.obs = np.zeros((capacity, obs_dim))
        self.next_obs = np.zeros((capacity, obs_dim))
        self.act = np.zeros(capacity, dtype=np.int64)
        self.done = np.zeros(capacity)
        self.signals = np.zeros((capacity, num_signals))
        self.gt = np.zeros(capacity)
        self.win_level = np.zeros(capacity)
        self.size = 0
        self.pos = 0

    def __len__(self) -> int:
        return self.size

    def add(self, obs, act, next_obs, done, signals, gt) -> int:
        i = self.pos
        self.obs[i] = obs
        self.act[i] = act
        self.next_obs[i] = next_obs
        self.done[i] = float(done)
        self.signals[i] = signals
        self.gt[i] = gt
        self.win_level[i] = 0.0
        self.pos = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)
        return i

    def sample(self, batch_size: int, rng: np.random.Generator) -> dict:
        if self.size == 0:
            raise InvalidInputError("replay buffer is empty")
        idx = rng.integers(0, self.size, size=batch_size)
        return self.take(idx)

    def take(self, idx) -> dict:
        return {"obs": self.obs[idx], "act": self.act[idx], "next_obs": self.next_obs[idx],
                "done": self.done[idx], "signals": self.signals[idx], "gt": self.gt[idx],
                "win_level": self.win_level[idx]}


@dataclass
class QConfig:
    hidden: tuple = (64, 64)
    activation: str = "tanh"
    lr: float = 1e-3
    gamma: float = 0.9
    batch_size: int = 64
    buffer_capacity: int = 20000
    target_sync: int = 200
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_fraction: float = 0.5
    clip_norm: Optional[float] = 10.0


@dataclass
class QAgent:
    q_net: MlpParams
    target_net: MlpParams
    opt: AdamState
    buffer: ReplayBuffer
    gamma: float = 0.9
    target_sync: int = 200
    updates: int = 0
    epsilon: float = 1.0

    @property
    def num_actions(self) -> int:
        return self.q_net.spec.n_out

    def q_values(self, obs) -> np.ndarray:
        return forward(self.q_net, obs)

    def greedy(self, obs) -> int:
        # argmax takes the lowest index on ties
        return int(np.argmax(self.q_values(obs)))

    def act(self, obs, rng: np.random.Generator, epsilon: Optional[float] = None) -> int:
        eps = self.epsilon if epsilon is None else epsilon
        if eps > 0 and rng.random() < eps:
            return int(rng.integers(0, self.num_actions))
        return self.greedy(obs)


def make_q_agent(obs_dim: int, num_actions: int, num_signals: int, config: QConfig,
                 rng: np.random.Generator) -> QAgent:
    spec = MlpSpec((obs_dim, *config.hidden, num_actions), config.activation)
    net = init_params(spec, rng)
    return QAgent(net, net.copy(), AdamState.for_params(net, config.lr, clip_norm=config.clip_norm),
                  ReplayBuffer(config.buffer_capacity, obs_dim, num_signals),
                  config.gamma, config.target_sync, epsilon=config.eps_start)


def linear_epsilon(step: int, total: int, config: QConfig) -> float:
    horizon = max(1, int(total * config.eps_decay_fraction))
    frac = min(1.0, step / horizon)
    return config.eps_start + frac * (config.eps_end - config.eps_start)


def td_targets(target_net: MlpParams, batch: dict, rewards: np.ndarray, gamma: float) -> np.ndarray:
    if gamma == 0.0:
        return rewards.astype(np.float64)
    nxt = forward(target_net, batch["next_obs"]).max(axis=1)
    return rewards + gamma * (1.0 - batch["done"]) * nxt


def td_loss(params: MlpParams, batch: dict, targets: np.ndarray) -> tuple:
    """Mean squared TD error against fixed targets, and its gradients."""
    q, cache = forward_cached(params, batch["obs"])
    rows = np.arange(q.shape[0])
    err = q[rows, batch["act"]] - targets
    loss = float(np.mean(err ** 2))
    up = np.zeros_like(q)
    up[rows, batch["act"]] = 2.0 * err / q.shape[0]
    grads, _ = backward(params, batch["obs"], up, cache)
    return loss, grads


def q_update(agent: QAgent, batch: dict, reward_source: Callable) -> float:
    """One gradient step on the squared TD error; returns the pre-update loss."""
    if len(batch["act"]) == 0:
        raise InvalidInputError("empty transition batch")
    rewards = np.asarray(reward_source(batch), dtype=np.float64)
    targets = td_targets(agent.target_net, batch, rewards, agent.gamma)
    loss, grads = td_loss(agent.q_net, batch, targets)
    optimizer_step(agent.q_net, grads, agent.opt)
    agent.updates += 1
    if agent.target_sync > 0 and agent.updates % agent.target_sync == 0:
        agent.target_net = agent.q_net.copy()
    return loss
