from .bandit import BanditConfig, bandit_step, dominant_arm_bandit
from .pendulum import PendulumConfig, PendulumEnv, energy, pendulum_step, wrap_angle
from .shift import Shift, ShiftedEnv, ShiftSchedule, apply_shift
from .traffic import (SIGNAL_NAMES as TRAFFIC_SIGNALS, TrafficConfig, TrafficEnv,
                      traffic_ground_truth, traffic_step)

__all__ = [
    "BanditConfig", "bandit_step", "dominant_arm_bandit", "PendulumConfig", "PendulumEnv",
    "pendulum_step", "energy", "wrap_angle", "Shift", "ShiftedEnv", "ShiftSchedule", "apply_shift", "TRAFFIC_SIGNALS",
    "TrafficConfig", "TrafficEnv", "traffic_ground_truth", "traffic_step",
]
