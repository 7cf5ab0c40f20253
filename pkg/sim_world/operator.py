"""Scripted operator hand: impedance tracking of time-stamped waypoints on the leader arm."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from sim_world.state import JointState

MAX_JITTER = 0.1


@dataclass(frozen=True)
class OperatorModel:
    times: np.ndarray
    targets: np.ndarray
    stiffness: np.ndarray
    damping: np.ndarray
    saturation: float
    jitter_bound: float = 0.0

    def __post_init__(self):
        if self.times.ndim != 1 or self.targets.shape[0] != self.times.shape[0]:
            raise ValueError("waypoint times and targets disagree in length")
        if (np.diff(self.times) <= 0).any():
            raise ValueError("waypoint times must be strictly increasing")
        if not 0.0 <= self.jitter_bound <= MAX_JITTER:
            raise ValueError(f"jitter bound must lie in [0, {MAX_JITTER}]")
        if self.saturation <= 0:
            raise ValueError("operator saturation must be positive")

    @classmethod
    def from_waypoints(cls, waypoints, stiffness, damping, saturation, jitter=0.0) -> "OperatorModel":
        times = np.array([time for time, _ in waypoints], dtype=float)
        targets = np.array([pose for _, pose in waypoints], dtype=float)
        return cls(times, targets, np.asarray(stiffness, float), np.asarray(damping, float), float(saturation), float(jitter))

    @property
    def duration(self) -> float:
        return float(self.times[-1])

    def target(self, t: float) -> np.ndarray:
        """Cosine-blended target pose at schedule time t."""
        if t <= self.times[0]:
            return self.targets[0].copy()
        if t >= self.times[-1]:
            return self.targets[-1].copy()
        i = int(np.searchsorted(self.times, t, side="right")) - 1
        s = (t - self.times[i]) / (self.times[i + 1] - self.times[i])
        w = 0.5 * (1.0 - np.cos(np.pi * s))
        return self.targets[i] + w * (self.targets[i + 1] - self.targets[i])

    def time_scale(self, seed: int | None) -> float:
        return 1.0 + episode_jitter(seed, self.jitter_bound)

    def episode_duration(self, seed: int | None) -> float:
        return self.duration / self.time_scale(seed)


@lru_cache(maxsize=256)
def episode_jitter(seed: int | None, bound: float) -> float:
    """One timing-jitter draw per (seed, bound); zero when jitter is disabled."""
    if bound == 0.0 or seed is None:
        return 0.0
    return float(np.random.default_rng(seed).uniform(-bound, bound))


def operator_torque(op: OperatorModel, leader: JointState, t: float, rng_seed: int | None) -> np.ndarray:
    scaled = t * op.time_scale(rng_seed)
    if scaled > op.duration:
        return np.zeros_like(leader.theta)
    torque = op.stiffness * (op.target(scaled) - leader.theta) - op.damping * leader.omega
    return np.clip(torque, -op.saturation, op.saturation)
