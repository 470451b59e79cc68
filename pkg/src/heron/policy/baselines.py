"""Reward-engineering and policy-ensemble baselines."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..core import InvalidInputError, InvalidStateError, SignalHierarchy


@dataclass
class EngineeredReward:
    """sum_i beta**(i+1) * normalised signal at hierarchy level i.

    Normalisers are per-signal mean/std fit on warm-up data; cost signals
    are sign-flipped through the hierarchy's senses.
    """

    beta: float
    hierarchy: SignalHierarchy
    mean: Optional[np.ndarray] = None
    std: Optional[np.ndarray] = None

    def __post_init__(self):
        if not 0.0 < self.beta <= 1.0:
            raise InvalidInputError("beta must lie in (0, 1]")

    @property
    def weights(self) -> np.ndarray:
        return self.beta ** np.arange(1, len(self.hierarchy) + 1)

    def fit(self, signals) -> "EngineeredReward":
        z = np.asarray(signals, dtype=np.float64).reshape(-1, len(self.hierarchy))
        self.mean = z.mean(axis=0)
        self.std = z.std(axis=0)
        return self

    def normalize(self, signals) -> np.ndarray:
        if self.mean is None or self.std is None:
            raise InvalidStateError("engineered reward normalisers are not fitted")
        return (np.asarray(signals, dtype=np.float64) - self.mean) / np.maximum(self.std, 1e-8)


def engineered_reward(signals, er: EngineeredReward):
    """Works on one signal vector or a ``(..., n)`` batch."""
    ranked = er.hierarchy.ranked(er.normalize(signals))
    out = ranked @ er.weights
    return float(out) if np.ndim(out) == 0 else out


def combine_action_values(values, mode: str = "uniform", gamma_w: float = 1.0) -> np.ndarray:
    """Weighted sum over policies (rows) of per-action values.

    ``uniform`` weights each of K policies by 1/K; ``geometric`` weights
    policy k (1-based, hierarchy order) by ``gamma_w ** k``.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2 or values.shape[0] == 0:
        raise InvalidInputError("need a (policies, actions) value table with >= 1 policy")
    k = values.shape[0]
    if mode == "uniform":
        w = np.full(k, 1.0 / k)
    elif mode == "geometric":
        w = gamma_w ** np.arange(1, k + 1)
    else:
        raise InvalidInputError(f"unknown ensemble mode {mode!r}")
    return w @ values


def ensemble_act(policies: Sequence, state, mode: str = "uniform", gamma_w: float = 1.0) -> int:
    """argmax over actions of the combined per-policy Q-values; lowest index wins ties."""
    if len(policies) == 0:
        raise InvalidInputError("empty policy set")
    values = np.stack([p.q_values(state) for p in policies])
    return int(np.argmax(combine_action_values(values, mode, gamma_w)))
