"""Episodic Gaussian policy gradient with a mean baseline."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import InvalidInputError
from ..nn import AdamState, MlpParams, MlpSpec, backward, forward, forward_cached, init_params, optimizer_step

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass
class PgAgent:
    policy_net: MlpParams
    opt: AdamState
    noise_scale: float = 0.5

    def __post_init__(self):
        if self.noise_scale <= 0:
            raise InvalidInputError("noise_scale must be positive")

    def mean(self, obs) -> np.ndarray:
        return forward(self.policy_net, obs)

    def act(self, obs, rng: np.random.Generator) -> np.ndarray:
        mu = self.mean(obs)
        return mu + self.noise_scale * rng.standard_normal(mu.shape)


def make_pg_agent(obs_dim: int, action_dim: int, hidden=(64, 64), lr: float = 1e-3,
                  noise_scale: float = 0.5, rng=None, activation: str = "tanh") -> PgAgent:
    spec = MlpSpec((obs_dim, *hidden, action_dim), activation)
    net = init_params(spec, rng if rng is not None else np.random.default_rng(0))
    return PgAgent(net, AdamState.for_params(net, lr), noise_scale)


def rewards_to_go(rewards, gamma: float) -> np.ndarray:
    out = np.zeros(len(rewards))
    acc = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        acc = rewards[t] + gamma * acc
        out[t] = acc
    return out


def mean_baseline_advantages(rewards, gamma: float) -> np.ndarray:
    rtg = rewards_to_go(rewards, gamma)
    return rtg - rtg.mean()


def gaussian_log_density(actions, means, sigma: float) -> np.ndarray:
    d = (np.asarray(actions) - means) / sigma
    return -0.5 * np.sum(d * d, axis=-1) - means.shape[-1] * (np.log(sigma) + 0.5 * LOG_2PI)


def pg_surrogate(params: MlpParams, states, actions, advantages, sigma: float) -> tuple:
    """``-mean_t log pi(a_t|s_t) * A_t`` and its gradients (descent direction)."""
    mu, cache = forward_cached(params, states)
    actions = np.asarray(actions, dtype=np.float64).reshape(mu.shape)
    adv = np.asarray(advantages, dtype=np.float64)
    logp = gaussian_log_density(actions, mu, sigma)
    loss = -float(np.mean(logp * adv))
    dmu = -((actions - mu) / sigma ** 2) * adv[:, None] / len(adv)
    grads, _ = backward(params, states, dmu, cache)
    return loss, grads


def pg_update(agent: PgAgent, states, actions, advantages) -> float:
    """Ascend the log-likelihood-weighted advantage; returns the surrogate loss."""
    if len(advantages) == 0:
        raise InvalidInputError("zero-length episode")
    loss, grads = pg_surrogate(agent.policy_net, np.asarray(states), actions, advantages,
                               agent.noise_scale)
    optimizer_step(agent.policy_net, grads, agent.opt)
    return loss
