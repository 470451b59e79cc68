"""Domain types shared across the package, signal aggregation and margins.

A trajectory segment is stored column-wise as numpy arrays (states,
actions, signals) rather than as a list of step tuples; ``steps`` gives the
row view when needed.
"""
from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np


class HeronError(Exception):
    """Base class for errors raised by this package."""


class InvalidInputError(HeronError, ValueError):
    pass


class InsufficientDataError(HeronError, ValueError):
    pass


class NumericError(HeronError, ArithmeticError):
    pass


class InvalidStateError(HeronError, RuntimeError):
    pass


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TrajectorySegment:
    """A window of consecutive (state, action, signals) steps.

    ``actions`` is 1-D of integer indices for discrete action spaces and
    2-D ``(k, action_dim)`` for continuous ones. ``rewards`` optionally holds
    the per-step ground-truth reward (used by the simulated-RLHF oracle and
    never by elicitation).
    """

    states: np.ndarray
    actions: np.ndarray
    signals: np.ndarray
    rewards: Optional[np.ndarray] = None
    segment_id: int = -1

    def __post_init__(self):
        states = np.asarray(self.states, dtype=np.float64)
        signals = np.asarray(self.signals, dtype=np.float64)
        actions = np.asarray(self.actions)
        if states.ndim == 1:
            states = states[:, None]
        if signals.ndim == 1:
            signals = signals[:, None]
        k = signals.shape[0]
        if k < 1:
            raise InvalidInputError("segment must contain at least one step")
        if states.ndim != 2 or states.shape[0] != k:
            raise InvalidInputError(f"states shape {states.shape} does not match {k} steps")
        if actions.shape[0] != k or actions.ndim not in (1, 2):
            raise InvalidInputError(f"actions shape {actions.shape} does not match {k} steps")
        if signals.shape[1] < 1:
            raise InvalidInputError("segment needs at least one feedback signal")
        if not np.all(np.isfinite(signals)):
            raise InvalidInputError("feedback signals must be finite")
        if actions.ndim == 1:
            actions = actions.astype(np.int64)
        else:
            actions = actions.astype(np.float64)
        object.__setattr__(self, "states", _frozen(states))
        object.__setattr__(self, "actions", _frozen(actions))
        object.__setattr__(self, "signals", _frozen(signals))
        if self.rewards is not None:
            rewards = np.asarray(self.rewards, dtype=np.float64).reshape(-1)
            if rewards.shape[0] != k:
                raise InvalidInputError("rewards length does not match segment length")
            object.__setattr__(self, "rewards", _frozen(rewards))

    def __len__(self) -> int:
        return self.signals.shape[0]

    @property
    def num_signals(self) -> int:
        return self.signals.shape[1]

    @property
    def state_dim(self) -> int:
        return self.states.shape[1]

    @property
    def discrete(self) -> bool:
        return self.actions.ndim == 1

    @property
    def steps(self) -> Iterator[tuple]:
        return zip(self.states, self.actions, self.signals)

    def ground_truth_return(self) -> float:
        if self.rewards is None:
            raise InvalidStateError("segment carries no ground-truth rewards")
        return float(self.rewards.sum())


def concat_segments(a: TrajectorySegment, b: TrajectorySegment) -> TrajectorySegment:
    if a.num_signals != b.num_signals or a.state_dim != b.state_dim:
        raise InvalidInputError("segments are not compatible")
    rewards = None
    if a.rewards is not None and b.rewards is not None:
        rewards = np.concatenate([a.rewards, b.rewards])
    return TrajectorySegment(
        np.concatenate([a.states, b.states]),
        np.concatenate([a.actions, b.actions]),
        np.concatenate([a.signals, b.signals]),
        rewards,
    )


@dataclass(frozen=True)
class SignalHierarchy:
    """Importance ranking over feedback signals, most important first.

    ``senses`` is indexed by signal (not by level): +1 when larger values are
    better, -1 for costs such as queue length. ``names`` is optional.
    """

    order: tuple
    senses: Optional[tuple] = None
    names: Optional[tuple] = None

    def __post_init__(self):
        order = tuple(int(i) for i in self.order)
        n = len(order)
        if n < 1 or sorted(order) != list(range(n)):
            raise InvalidInputError(f"hierarchy order {order} is not a permutation of 0..{n - 1}")
        senses = (1.0,) * n if self.senses is None else tuple(float(s) for s in self.senses)
        if len(senses) != n or any(s not in (1.0, -1.0) for s in senses):
            raise InvalidInputError("senses must hold one +1/-1 entry per signal")
        object.__setattr__(self, "order", order)
        object.__setattr__(self, "senses", senses)
        if self.names is not None:
            if len(self.names) != n:
                raise InvalidInputError("names must hold one entry per signal")
            object.__setattr__(self, "names", tuple(self.names))

    def __len__(self) -> int:
        return len(self.order)

    @classmethod
    def from_names(cls, ranked: Sequence[str], all_names: Sequence[str],
                   senses: Optional[Sequence[float]] = None) -> "SignalHierarchy":
        unknown = [r for r in ranked if r not in all_names]
        if unknown:
            raise InvalidInputError(f"hierarchy: unknown signal name(s) {unknown}")
        if sorted(ranked) != sorted(all_names):
            raise InvalidInputError(
                f"hierarchy: must rank every signal exactly once, got {list(ranked)}")
        order = tuple(list(all_names).index(r) for r in ranked)
        return cls(order, None if senses is None else tuple(senses), tuple(all_names))

    def ranked(self, z: np.ndarray) -> np.ndarray:
        """Reorder signal values (last axis) by level and flip cost signals."""
        z = np.asarray(z, dtype=np.float64)
        idx = np.asarray(self.order)
        return z[..., idx] * np.asarray(self.senses)[idx]

    def ranked_names(self) -> list:
        if self.names is None:
            return [f"z{i}" for i in self.order]
        return [self.names[i] for i in self.order]


@dataclass(frozen=True)
class MarginSet:
    """Per-level margins, indexed by hierarchy level (level 1 at index 0)."""

    deltas: tuple

    def __post_init__(self):
        deltas = tuple(float(d) for d in self.deltas)
        if not deltas:
            raise InvalidInputError("margin set is empty")
        if any(not np.isfinite(d) or d < 0 for d in deltas):
            raise InvalidInputError(f"margins must be finite and non-negative: {deltas}")
        object.__setattr__(self, "deltas", deltas)

    def __len__(self) -> int:
        return len(self.deltas)


class PreferenceLabel(enum.IntEnum):
    TIE = 0
    FIRST = 1
    SECOND = 2
    DISCARD = 3


@dataclass(frozen=True, eq=False)
class PreferencePair:
    winner: TrajectorySegment
    loser: TrajectorySegment
    win_level: int

    def __post_init__(self):
        if self.win_level < 1:
            raise InvalidInputError("win_level is 1-based")
        if self.winner.num_signals != self.loser.num_signals:
            raise InvalidInputError("winner and loser come from different environments")


def aggregate_signals(segment: TrajectorySegment) -> np.ndarray:
    """Per-signal sums over the steps of a segment."""
    if segment is None or len(segment) == 0:
        raise InvalidInputError("cannot aggregate an empty segment")
    return segment.signals.sum(axis=0)


def aggregate_many(segments: Sequence[TrajectorySegment]) -> np.ndarray:
    return np.stack([aggregate_signals(s) for s in segments])


def compute_margins(segments: Sequence[TrajectorySegment], hierarchy: SignalHierarchy,
                    multiplier: float = 1.0) -> MarginSet:
    """Population standard deviation of each aggregate signal, times ``multiplier``."""
    if len(segments) < 2:
        raise InsufficientDataError(f"need at least 2 segments for margins, got {len(segments)}")
    if multiplier < 0 or not np.isfinite(multiplier):
        raise InvalidInputError("margin multiplier must be finite and >= 0")
    agg = aggregate_many(segments)
    if agg.shape[1] != len(hierarchy):
        raise InvalidInputError(
            f"segments carry {agg.shape[1]} signals, hierarchy ranks {len(hierarchy)}")
    std = agg.std(axis=0)[list(hierarchy.order)]
    return MarginSet(tuple(multiplier * std))


# -- segment record files ----------------------------------------------------
#
# Columns: segment_id, t, s0..s{S-1}, a0..a{A-1}, z0..z{N-1}, r
# A discrete action occupies one integer column. r is empty when the segment
# carries no ground-truth reward.

SEGMENT_FORMAT = "heron-segments/1"


def write_segment_records(path, segments: Iterable[TrajectorySegment]) -> int:
    segments = list(segments)
    if not segments:
        raise InvalidInputError("no segments to write")
    first = segments[0]
    adim = 1 if first.discrete else first.actions.shape[1]
    header = (["segment_id", "t"] + [f"s{i}" for i in range(first.state_dim)]
              + [f"a{i}" for i in range(adim)] + [f"z{i}" for i in range(first.num_signals)]
              + ["r"])
    rows = 0
    with open(path, "w", newline="") as fh:
        fh.write(f"# {SEGMENT_FORMAT} discrete={int(first.discrete)}\n")
        w = csv.writer(fh)
        w.writerow(header)
        for j, seg in enumerate(segments):
            sid = seg.segment_id if seg.segment_id >= 0 else j
            for t in range(len(seg)):
                a = [int(seg.actions[t])] if seg.discrete else [repr(float(x)) for x in seg.actions[t]]
                r = "" if seg.rewards is None else repr(float(seg.rewards[t]))
                w.writerow([sid, t] + [repr(float(x)) for x in seg.states[t]] + a
                           + [repr(float(x)) for x in seg.signals[t]] + [r])
                rows += 1
    return rows


def read_segment_records(path) -> list:
    path = Path(path)
    with open(path, newline="") as fh:
        first = fh.readline().strip()
        if not first.startswith("#") or SEGMENT_FORMAT not in first:
            raise InvalidInputError(f"{path}: not a {SEGMENT_FORMAT} file")
        discrete = "discrete=1" in first
        reader = csv.reader(fh)
        header = next(reader)
        s_cols = [i for i, h in enumerate(header) if h.startswith("s") and h[1:].isdigit()]
        a_cols = [i for i, h in enumerate(header) if h.startswith("a") and h[1:].isdigit()]
        z_cols = [i for i, h in enumerate(header) if h.startswith("z") and h[1:].isdigit()]
        groups: dict = {}
        for row in reader:
            groups.setdefault(int(row[0]), []).append(row)
    out = []
    for sid, rows in groups.items():
        rows.sort(key=lambda r: int(r[1]))
        states = [[float(r[i]) for i in s_cols] for r in rows]
        if discrete:
            actions = [int(r[a_cols[0]]) for r in rows]
        else:
            actions = [[float(r[i]) for i in a_cols] for r in rows]
        signals = [[float(r[i]) for i in z_cols] for r in rows]
        rewards = None if rows[0][-1] == "" else [float(r[-1]) for r in rows]
        out.append(TrajectorySegment(np.array(states).reshape(len(rows), len(s_cols)),
                                     np.array(actions), np.array(signals), rewards, sid))
    return out


def cut_segments(states, actions, signals, rewards=None, length: int = 32,
                 start_id: int = 0) -> list:
    """Split one trajectory into consecutive non-overlapping segments of ``length``.

    A trailing remainder shorter than ``length`` is dropped.
    """
    if length < 1:
        raise InvalidInputError("segment length must be >= 1")
    n = len(signals)
    out = []
    for j, lo in enumerate(range(0, n - length + 1, length)):
        hi = lo + length
        out.append(TrajectorySegment(states[lo:hi], actions[lo:hi], signals[lo:hi],
                                     None if rewards is None else rewards[lo:hi],
                                     start_id + j))
    return out
