"""Hierarchical preference elicitation over ranked feedback signals."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .core import (InsufficientDataError, InvalidInputError, MarginSet, PreferenceLabel,
                   PreferencePair, SignalHierarchy, TrajectorySegment, aggregate_many,
                   aggregate_signals)


@dataclass
class UtilizationStats:
    per_level_counts: list
    discard_count: int = 0

    @classmethod
    def empty(cls, levels: int) -> "UtilizationStats":
        return cls([0] * levels, 0)

    @property
    def total(self) -> int:
        return sum(self.per_level_counts) + self.discard_count

    def record(self, level: Optional[int]) -> None:
        if level is None:
            self.discard_count += 1
        else:
            self.per_level_counts[level - 1] += 1

    def merge(self, other: "UtilizationStats") -> "UtilizationStats":
        if len(other.per_level_counts) != len(self.per_level_counts):
            raise InvalidInputError("cannot merge stats with different depth")
        return UtilizationStats([a + b for a, b in zip(self.per_level_counts, other.per_level_counts)],
                                self.discard_count + other.discard_count)

    def to_text(self) -> str:
        lines = [f"level_{i + 1}={c}" for i, c in enumerate(self.per_level_counts)]
        lines.append(f"discard={self.discard_count}")
        lines.append(f"total={self.total}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "UtilizationStats":
        kv = dict(line.split("=", 1) for line in text.split() if "=" in line)
        levels = sorted((k for k in kv if k.startswith("level_")), key=lambda k: int(k[6:]))
        return cls([int(kv[k]) for k in levels], int(kv.get("discard", 0)))


@dataclass
class PreferenceDataset:
    pairs: list
    stats: UtilizationStats
    # (first, second) index into the pool for every kept pair, winner first
    index_pairs: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.pairs)


def _decide(za: np.ndarray, zb: np.ndarray, deltas) -> tuple:
    # za, zb already ranked and sense-adjusted, level 1 first
    for level, (x, y, d) in enumerate(zip(za, zb, deltas), start=1):
        if x > y + d:
            return PreferenceLabel.FIRST, level
        if y > x + d:
            return PreferenceLabel.SECOND, level
    return PreferenceLabel.DISCARD, None


def _check(hierarchy: SignalHierarchy, margins: MarginSet, n_signals: int) -> None:
    if len(hierarchy) != n_signals:
        raise InvalidInputError(
            f"segments carry {n_signals} signals but the hierarchy ranks {len(hierarchy)}")
    if len(margins) != len(hierarchy):
        raise InvalidInputError("one margin per hierarchy level is required")


def elicit_preference(a: TrajectorySegment, b: TrajectorySegment, hierarchy: SignalHierarchy,
                      margins: MarginSet) -> tuple:
    """Walk the hierarchy on aggregated signals and label the pair.

    Returns ``(label, win_level)``; ``win_level`` is None for a discard.
    """
    if a.num_signals != b.num_signals:
        raise InvalidInputError(
            f"signal count mismatch: {a.num_signals} vs {b.num_signals}")
    _check(hierarchy, margins, a.num_signals)
    za = hierarchy.ranked(aggregate_signals(a))
    zb = hierarchy.ranked(aggregate_signals(b))
    return _decide(za, zb, margins.deltas)


def _sample_pairs(n: int, num_pairs: int, rng: np.random.Generator) -> np.ndarray:
    total = n * (n - 1) // 2
    if num_pairs <= total:
        flat = rng.choice(total, size=num_pairs, replace=False)
        iu, ju = np.triu_indices(n, 1)
        return np.stack([iu[flat], ju[flat]], axis=1)
    i = rng.integers(0, n, size=num_pairs)
    j = (i + rng.integers(1, n, size=num_pairs)) % n
    return np.stack([np.minimum(i, j), np.maximum(i, j)], axis=1)


def build_preference_dataset(pool: Sequence[TrajectorySegment], hierarchy: SignalHierarchy,
                             margins: MarginSet, num_pairs: int,
                             rng: np.random.Generator) -> PreferenceDataset:
    """Sample unordered pairs from ``pool``, label them, drop discards.

    Distinct pairs are drawn without replacement while ``num_pairs`` does
    not exceed the number of distinct pairs; beyond that, with replacement.
    """
    if len(pool) < 2:
        raise InsufficientDataError(f"pool needs at least 2 segments, got {len(pool)}")
    if num_pairs < 1:
        raise InvalidInputError("num_pairs must be positive")
    _check(hierarchy, margins, pool[0].num_signals)
    ranked = hierarchy.ranked(aggregate_many(pool))
    deltas = margins.deltas
    stats = UtilizationStats.empty(len(hierarchy))
    pairs, index_pairs = [], []
    for i, j in _sample_pairs(len(pool), num_pairs, rng):
        label, level = _decide(ranked[i], ranked[j], deltas)
        stats.record(level)
        if label == PreferenceLabel.FIRST:
            pairs.append(PreferencePair(pool[i], pool[j], level))
            index_pairs.append((int(i), int(j)))
        elif label == PreferenceLabel.SECOND:
            pairs.append(PreferencePair(pool[j], pool[i], level))
            index_pairs.append((int(j), int(i)))
    return PreferenceDataset(pairs, stats, index_pairs)


def oracle_preference(a: TrajectorySegment, b: TrajectorySegment,
                      ground_truth_return_fn: Optional[Callable] = None) -> PreferenceLabel:
    """Simulated human label: prefer the segment with the higher true return."""
    fn = ground_truth_return_fn or (lambda s: s.ground_truth_return())
    ra, rb = fn(a), fn(b)
    if ra > rb:
        return PreferenceLabel.FIRST
    if ra < rb:
        return PreferenceLabel.SECOND
    return PreferenceLabel.TIE


def build_oracle_dataset(pool: Sequence[TrajectorySegment], num_pairs: int,
                         rng: np.random.Generator,
                         ground_truth_return_fn: Optional[Callable] = None) -> PreferenceDataset:
    """Like :func:`build_preference_dataset` but labelled by true return.

    All decided pairs are recorded at level 1; ties count as discards.
    """
    if len(pool) < 2:
        raise InsufficientDataError(f"pool needs at least 2 segments, got {len(pool)}")
    stats = UtilizationStats.empty(1)
    pairs, index_pairs = [], []
    for i, j in _sample_pairs(len(pool), num_pairs, rng):
        label = oracle_preference(pool[i], pool[j], ground_truth_return_fn)
        if label == PreferenceLabel.TIE:
            stats.record(None)
            continue
        stats.record(1)
        w, u = (i, j) if label == PreferenceLabel.FIRST else (j, i)
        pairs.append(PreferencePair(pool[w], pool[u], 1))
        index_pairs.append((int(w), int(u)))
    return PreferenceDataset(pairs, stats, index_pairs)


def utilization_fractions(stats: UtilizationStats) -> list:
    """Per-level decision fractions followed by the discard fraction.

    The largest entry absorbs the rounding residual so the exactly-rounded
    sum is 1 to within one ulp.
    """
    total = stats.total
    if total <= 0:
        raise InvalidInputError("no pairs processed")
    fr = [c / total for c in stats.per_level_counts] + [stats.discard_count / total]
    k = int(np.argmax(fr))
    fr[k] += 1.0 - math.fsum(fr)
    return fr


def write_dataset(path, dataset: PreferenceDataset) -> None:
    with open(path, "w") as fh:
        fh.write("winner_id,loser_id,win_level\n")
        for p in dataset.pairs:
            fh.write(f"{p.winner.segment_id},{p.loser.segment_id},{p.win_level}\n")


def read_dataset_rows(path) -> list:
    rows = []
    with open(path) as fh:
        next(fh)
        for line in fh:
            if line.strip():
                w, u, lvl = line.strip().split(",")
                rows.append((int(w), int(u), int(lvl)))
    return rows
