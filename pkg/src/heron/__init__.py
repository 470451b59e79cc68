"""Hierarchical preference-based reward design for reinforcement learning."""
from .core import (HeronError, InsufficientDataError, InvalidInputError, InvalidStateError,
                   MarginSet, NumericError, PreferenceLabel, PreferencePair, SignalHierarchy,
                   TrajectorySegment, aggregate_signals, compute_margins)
from .elicit import (PreferenceDataset, UtilizationStats, build_preference_dataset,
                     elicit_preference, oracle_preference, utilization_fractions)

__version__ = "0.1.0"
