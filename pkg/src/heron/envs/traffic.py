"""Discrete-time queue model of a grid of signalised intersections.

Each intersection has four incoming lanes (0: from north, 1: from south,
2: from east, 3: from west). Phase 0 gives green to the north/south lanes,
phase 1 to east/west. Cars go straight through; a car leaving an
intersection travels ``segment_travel_steps`` to the next one or leaves the
network at the boundary.

Per step and per intersection the order is: apply the phase choice, add
arrivals at the tail of each lane, discharge up to ``discharge_rate`` cars
from the head of every green lane, then measure the feedback signals.

Every queued car is stopped, so a car's waiting time at an intersection is
simply the number of steps since it joined that queue. Lanes keep running
sums of join steps and of (entry_step + free_flow_eta), which makes the
wait and delay totals O(1) to evaluate.
"""
from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, replace

import numpy as np

from ..core import InvalidInputError

log = logging.getLogger(__name__)

SIGNAL_NAMES = ("q", "wt", "dl", "em", "fl", "vl")
# +1 where larger is better
SIGNAL_SENSES = (-1.0, -1.0, -1.0, -1.0, -1.0, 1.0)
GROUND_TRUTH_WEIGHTS = np.array([-0.5, -0.5, -0.5, -0.25, -1.0, 1.0])

# cars per lane per step at 1 Hz control, from 700 car/hour
DEFAULT_ARRIVAL_RATE = 700.0 / 3600.0

N, S, E, W = 0, 1, 2, 3
GREEN_LANES = ((N, S), (E, W))


@dataclass(frozen=True)
class TrafficConfig:
    grid_rows: int = 2
    grid_cols: int = 2
    arrival_rate: float = DEFAULT_ARRIVAL_RATE
    discharge_rate: int = 1
    segment_travel_steps: int = 5
    phase_min_duration: int = 0
    episode_length: int = 300

    def __post_init__(self):
        if self.grid_rows < 1 or self.grid_cols < 1:
            raise InvalidInputError("grid dimensions must be >= 1")
        if not (0.0 <= self.arrival_rate <= 1.0):
            raise InvalidInputError("arrival_rate is a per-step probability in [0, 1]")
        if self.discharge_rate < 0 or int(self.discharge_rate) != self.discharge_rate:
            raise InvalidInputError("discharge_rate must be a non-negative integer")
        if self.segment_travel_steps < 1:
            raise InvalidInputError("segment_travel_steps must be >= 1")
        if self.phase_min_duration < 0:
            raise InvalidInputError("phase_min_duration must be >= 0")
        if self.episode_length < 1:
            raise InvalidInputError("episode_length must be >= 1")

    @property
    def num_intersections(self) -> int:
        return self.grid_rows * self.grid_cols


def traffic_ground_truth(signals) -> float:
    """-0.5 q - 0.5 wt - 0.5 dl - 0.25 em - fl + vl; accepts (..., 6) arrays."""
    z = np.asarray(signals, dtype=np.float64)
    if z.shape[-1] != 6:
        raise InvalidInputError(f"expected 6 signals (q, wt, dl, em, fl, vl), got {z.shape[-1]}")
    out = z @ GROUND_TRUTH_WEIGHTS
    return float(out) if out.ndim == 0 else out


class _Lane:
    __slots__ = ("cars", "sum_join", "sum_origin", "transit")

    def __init__(self):
        self.cars = deque()  # (entry_step, join_step, free_flow_eta)
        self.sum_join = 0
        self.sum_origin = 0  # sum of entry_step + free_flow_eta
        self.transit = deque()  # (arrive_step, entry_step, free_flow_eta)

    def push(self, entry: int, join: int, eta: int) -> None:
        self.cars.append((entry, join, eta))
        self.sum_join += join
        self.sum_origin += entry + eta

    def pop(self) -> tuple:
        car = self.cars.popleft()
        self.sum_join -= car[1]
        self.sum_origin -= car[0] + car[2]
        return car


class TrafficEnv:
    """Multi-agent traffic grid, one agent per intersection.

    ``step`` returns ``(obs, signals, rewards, done, info)`` where ``signals``
    is ``(num_agents, 6)`` ordered as :data:`SIGNAL_NAMES` and ``rewards`` is
    the per-agent ground-truth reward.
    """

    signal_names = SIGNAL_NAMES
    signal_senses = SIGNAL_SENSES
    num_actions = 2
    obs_dim = 11

    def __init__(self, config: TrafficConfig = TrafficConfig(), seed: int = 0):
        self.config = config
        self.rng = np.random.default_rng(seed)
        self.num_agents = config.num_intersections
        self._build()
        self.reset()

    def _build(self) -> None:
        rows, cols = self.config.grid_rows, self.config.grid_cols
        self._downstream = {}
        entries = []
        for r in range(rows):
            for c in range(cols):
                i = r * cols + c
                self._downstream[(i, N)] = (i + cols, N) if r + 1 < rows else None
                self._downstream[(i, S)] = (i - cols, S) if r > 0 else None
                self._downstream[(i, E)] = (i - 1, E) if c > 0 else None
                self._downstream[(i, W)] = (i + 1, W) if c + 1 < cols else None
                if r == 0:
                    entries.append((i, N))
                if r == rows - 1:
                    entries.append((i, S))
                if c == cols - 1:
                    entries.append((i, E))
                if c == 0:
                    entries.append((i, W))
        self.entry_lanes = entries

    def reset(self, seed=None) -> np.ndarray:
        if seed is not None:
            self.rng = np.random.default_rng(seed)
        a = self.num_agents
        self.t = 0
        self.lanes = [[_Lane() for _ in range(4)] for _ in range(a)]
        self.phase = np.zeros(a, dtype=np.int64)
        self.time_in_phase = np.zeros(a, dtype=np.int64)
        self.entered = 0
        self.exited = 0
        self.coerced = 0
        return self.observe()

    def set_params(self, **changes) -> None:
        self.config = replace(self.config, **changes)

    # -- bookkeeping -------------------------------------------------------

    def place_cars(self, agent: int, lane: int, count: int) -> None:
        """Put ``count`` cars at the back of a queue as if they just entered."""
        for _ in range(count):
            self.lanes[agent][lane].push(self.t, self.t, 0)
            self.entered += 1

    def num_queued(self) -> int:
        return sum(len(l.cars) for lanes in self.lanes for l in lanes)

    def num_in_transit(self) -> int:
        return sum(len(l.transit) for lanes in self.lanes for l in lanes)

    def conservation_gap(self) -> int:
        """entered - (queued + in transit + exited); zero when cars are conserved."""
        return self.entered - (self.num_queued() + self.num_in_transit() + self.exited)

    def observe(self) -> np.ndarray:
        obs = np.zeros((self.num_agents, self.obs_dim))
        t1 = self.t
        for i, lanes in enumerate(self.lanes):
            for k, lane in enumerate(lanes):
                n = len(lane.cars)
                obs[i, k] = n / 10.0
                obs[i, 4 + k] = np.log1p(n * t1 - lane.sum_join) / 5.0
            obs[i, 8 + self.phase[i]] = 1.0
            obs[i, 10] = min(self.time_in_phase[i], 20) / 20.0
        return obs

    # -- dynamics ----------------------------------------------------------

    def step(self, actions) -> tuple:
        actions = np.asarray(actions).reshape(-1)
        if actions.shape[0] != self.num_agents:
            raise InvalidInputError(
                f"expected {self.num_agents} actions, got {actions.shape[0]}")
        cfg = self.config
        t = self.t
        a_count = self.num_agents
        signals = np.zeros((a_count, 6))
        flags = np.zeros(a_count, dtype=bool)

        for i in range(a_count):
            want = int(actions[i])
            if want not in (0, 1):
                raise InvalidInputError(f"phase choice must be 0 or 1, got {want}")
            if want != self.phase[i]:
                if self.time_in_phase[i] < cfg.phase_min_duration:
                    flags[i] = True
                    self.coerced += 1
                else:
                    self.phase[i] = want
                    self.time_in_phase[i] = 0
                    signals[i, 4] = 1.0

        arrivals = np.zeros((a_count, 4), dtype=np.int64)
        draws = self.rng.random(len(self.entry_lanes)) < cfg.arrival_rate
        for (i, k), hit in zip(self.entry_lanes, draws):
            if hit:
                self.lanes[i][k].push(t, t, 0)
                arrivals[i, k] += 1
                self.entered += 1
        for i in range(a_count):
            for k, lane in enumerate(self.lanes[i]):
                tr = lane.transit
                while tr and tr[0][0] <= t:
                    _, entry, eta = tr.popleft()
                    lane.push(entry, t, eta)
                    arrivals[i, k] += 1

        travel = cfg.segment_travel_steps
        rate = int(cfg.discharge_rate)
        t1 = t + 1
        for i in range(a_count):
            green = GREEN_LANES[self.phase[i]]
            passed = 0
            for k in green:
                lane = self.lanes[i][k]
                for _ in range(min(rate, len(lane.cars))):
                    entry, _, eta = lane.pop()
                    passed += 1
                    dest = self._downstream[(i, k)]
                    if dest is None:
                        self.exited += 1
                    else:
                        j, kk = dest
                        self.lanes[j][kk].transit.append((t + travel, entry, eta + travel))
            q = wt = dl = em = 0
            for k, lane in enumerate(self.lanes[i]):
                n = len(lane.cars)
                q += n
                wt += n * t1 - lane.sum_join
                dl += n * t1 - lane.sum_origin
                em += min(arrivals[i, k], n)
            signals[i, 0] = q
            signals[i, 1] = wt
            signals[i, 2] = max(dl, 0)
            signals[i, 3] = em
            signals[i, 5] = passed
            self.time_in_phase[i] += 1

        self.t = t1
        rewards = signals @ GROUND_TRUTH_WEIGHTS
        done = self.t >= cfg.episode_length
        return self.observe(), signals, rewards, done, {"coerced": flags}


def traffic_step(env: TrafficEnv, actions) -> tuple:
    """Advance ``env`` one control step; returns ``(obs, signals, rewards, done)``."""
    obs, signals, rewards, done, _ = env.step(actions)
    return obs, signals, rewards, done
