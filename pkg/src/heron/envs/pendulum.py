"""Torque-limited pendulum swing-up with three ranked cost signals."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import InvalidInputError, NumericError

SIGNAL_NAMES = ("angle", "velocity", "effort")
SIGNAL_SENSES = (1.0, 1.0, 1.0)


@dataclass(frozen=True)
class PendulumConfig:
    gravity: float = 10.0
    mass: float = 1.0
    length: float = 1.0
    dt: float = 0.05
    torque_limit: float = 2.0
    max_speed: float = 8.0
    episode_length: int = 200

    def __post_init__(self):
        if self.dt <= 0:
            raise InvalidInputError("dt must be positive")
        if min(self.mass, self.length, self.torque_limit, self.max_speed) <= 0:
            raise InvalidInputError("mass, length and limits must be positive")
        if self.episode_length < 1:
            raise InvalidInputError("episode_length must be >= 1")


def wrap_angle(theta: float) -> float:
    """Map to (-pi, pi]."""
    w = (theta + np.pi) % (2 * np.pi) - np.pi
    return np.pi if w == -np.pi else w


def pendulum_signals(theta: float, theta_dot: float, u: float) -> np.ndarray:
    th = wrap_angle(theta)
    return np.array([-th * th, -0.1 * theta_dot * theta_dot, -0.001 * u * u])


def pendulum_step(state, u: float, config: PendulumConfig = PendulumConfig()) -> tuple:
    """One integration step from ``state = (theta, theta_dot)``.

    Velocity is updated first and the new velocity moves the angle.
    Signals and reward are measured on the pre-step state and the clamped
    torque. Returns ``(next_state, signals, reward)``.
    """
    theta, theta_dot = float(state[0]), float(state[1])
    u = float(np.clip(u, -config.torque_limit, config.torque_limit))
    if not (np.isfinite(theta) and np.isfinite(theta_dot) and np.isfinite(u)):
        raise NumericError("non-finite pendulum state or torque")
    g, m, l, dt = config.gravity, config.mass, config.length, config.dt
    z = pendulum_signals(theta, theta_dot, u)
    acc = 3.0 * g / (2.0 * l) * np.sin(theta) + 3.0 / (m * l * l) * u
    new_dot = float(np.clip(theta_dot + acc * dt, -config.max_speed, config.max_speed))
    new_theta = wrap_angle(theta + new_dot * dt)
    return (new_theta, new_dot), z, float(z.sum())


def energy(state, config: PendulumConfig = PendulumConfig()) -> float:
    """Rod energy with the upright position at potential maximum."""
    theta, theta_dot = state
    inertia = config.mass * config.length ** 2 / 3.0
    return 0.5 * inertia * theta_dot ** 2 + config.mass * config.gravity * config.length / 2 * np.cos(theta)


class PendulumEnv:
    """Single-agent wrapper; observation is (cos theta, sin theta, theta_dot / max_speed)."""

    signal_names = SIGNAL_NAMES
    signal_senses = SIGNAL_SENSES
    num_agents = 1
    obs_dim = 3
    action_dim = 1

    def __init__(self, config: PendulumConfig = PendulumConfig(), seed: int = 0):
        self.config = config
        self.rng = np.random.default_rng(seed)
        self.reset()

    def reset(self, seed=None) -> np.ndarray:
        if seed is not None:
            self.rng = np.random.default_rng(seed)
        self.state = (float(self.rng.uniform(-np.pi, np.pi)), float(self.rng.uniform(-1, 1)))
        self.t = 0
        return self.observe()

    def observe(self) -> np.ndarray:
        th, dot = self.state
        return np.array([[np.cos(th), np.sin(th), dot / self.config.max_speed]])

    def step(self, actions) -> tuple:
        u = float(np.asarray(actions, dtype=np.float64).reshape(-1)[0])
        self.state, z, r = pendulum_step(self.state, u, self.config)
        self.t += 1
        done = self.t >= self.config.episode_length
        return self.observe(), z[None, :], np.array([r]), done, {}
