"""Mid-run environment parameter changes."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

from ..core import InvalidInputError

log = logging.getLogger(__name__)

SHIFTABLE = ("discharge_rate", "arrival_rate")


@dataclass(frozen=True)
class Shift:
    param: str
    value: float
    at_step: int


@dataclass
class ShiftSchedule:
    """The original config before ``shift.at_step`` and the shifted one after."""

    before: object
    after: object
    shift: Shift
    transitions: list = field(default_factory=list)

    def config_at(self, step: int):
        return self.after if step >= self.shift.at_step else self.before


def apply_shift(config, shift: Shift) -> ShiftSchedule:
    if shift.param not in SHIFTABLE or not hasattr(config, shift.param):
        raise InvalidInputError(f"shift.param: unknown parameter {shift.param!r}")
    if shift.at_step < 0:
        raise InvalidInputError("shift.step must be >= 0")
    value = shift.value
    if shift.param == "discharge_rate":
        value = int(value)
    return ShiftSchedule(config, replace(config, **{shift.param: value}), shift)


class ShiftedEnv:
    """Wraps an env and swaps its config when the global step crosses the shift.

    The global step keeps counting across ``reset`` calls.
    """

    def __init__(self, env, schedule: ShiftSchedule):
        self.env = env
        self.schedule = schedule
        self.global_step = 0
        self._sync()

    def __getattr__(self, name):
        return getattr(self.env, name)

    def _sync(self) -> None:
        cfg = self.schedule.config_at(self.global_step)
        if cfg is not self.env.config:
            p = self.schedule.shift.param
            old = getattr(self.env.config, p)
            self.env.config = cfg
            if self.global_step > 0 or self.schedule.shift.at_step == 0:
                self.schedule.transitions.append((self.global_step, p, old, getattr(cfg, p)))
                log.info("step %d: %s %s -> %s", self.global_step, p, old, getattr(cfg, p))

    def reset(self, seed=None):
        return self.env.reset(seed)

    def step(self, actions):
        self._sync()
        out = self.env.step(actions)
        self.global_step += 1
        return out
