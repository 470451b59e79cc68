"""Contextual bandit whose arms emit fixed feedback-signal vectors."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import InvalidInputError


@dataclass(frozen=True)
class BanditConfig:
    num_contexts: int
    num_arms: int
    table: np.ndarray  # (num_contexts, num_arms, num_signals)

    def __post_init__(self):
        table = np.asarray(self.table, dtype=np.float64)
        if table.ndim == 2:
            table = table[:, :, None]
        if table.shape[:2] != (self.num_contexts, self.num_arms):
            raise InvalidInputError(
                f"signal table shape {table.shape} does not match "
                f"({self.num_contexts}, {self.num_arms}, n)")
        if not np.all(np.isfinite(table)):
            raise InvalidInputError("signal table must be finite")
        table.setflags(write=False)
        object.__setattr__(self, "table", table)

    @property
    def num_signals(self) -> int:
        return self.table.shape[2]


def bandit_step(config: BanditConfig, context: int, arm: int) -> np.ndarray:
    if not 0 <= context < config.num_contexts:
        raise InvalidInputError(f"context {context} out of range")
    if not 0 <= arm < config.num_arms:
        raise InvalidInputError(f"arm {arm} out of range")
    return config.table[context, arm].copy()


def dominant_arm_bandit(num_contexts: int = 2, num_arms: int = 2, best: int = 0,
                        rng=None) -> BanditConfig:
    """Bandit where arm ``best`` wins the top signal by a wide gap in every context."""
    rng = rng if rng is not None else np.random.default_rng(0)
    table = rng.normal(size=(num_contexts, num_arms, 2))
    table[:, :, 0] = 0.0
    table[:, best, 0] = 10.0
    return BanditConfig(num_contexts, num_arms, table)
