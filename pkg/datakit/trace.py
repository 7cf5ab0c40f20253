"""In-memory 500 Hz episode log of both arms plus environment channels."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from config.defaults import SAMPLE_PERIOD
from sim_world.state import CommandFrame, JointState

SIDE_CHANNELS = ("theta_ref", "omega_ref", "tau_ref", "theta", "omega", "tau")
ENV_CHANNELS = ("contact_normal", "grip_force", "object_pos", "object_held")
OUTCOMES = ("success", "failed", "unknown")


@dataclass
class SideLog:
    """Command and response columns of one arm, each shaped (ticks, joints)."""

    theta_ref: np.ndarray
    omega_ref: np.ndarray
    tau_ref: np.ndarray
    theta: np.ndarray
    omega: np.ndarray
    tau: np.ndarray

    @classmethod
    def allocate(cls, ticks: int, n_joints: int) -> "SideLog":
        return cls(*(np.zeros((ticks, n_joints)) for _ in SIDE_CHANNELS))

    def record(self, k: int, cmd: CommandFrame, res: JointState):
        self.theta_ref[k] = cmd.theta_ref
        self.omega_ref[k] = cmd.omega_ref
        self.tau_ref[k] = cmd.tau_ref
        self.theta[k] = res.theta
        self.omega[k] = res.omega
        self.tau[k] = res.tau

    def channels(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in SIDE_CHANNELS}

    def take(self, index) -> "SideLog":
        return SideLog(*(getattr(self, name)[index] for name in SIDE_CHANNELS))

    def copy(self) -> "SideLog":
        return SideLog(*(getattr(self, name).copy() for name in SIDE_CHANNELS))

    def command(self, k: int) -> CommandFrame:
        return CommandFrame(self.theta_ref[k], self.omega_ref[k], self.tau_ref[k])

    def response(self, k: int) -> JointState:
        return JointState(self.theta[k], self.omega[k], self.tau[k])

    def response_as_command(self, k: int) -> CommandFrame:
        """Cross-wired command: positions and velocities copied, force sign flipped."""
        return CommandFrame(self.theta[k], self.omega[k], -self.tau[k])

    def is_finite(self) -> bool:
        return all(np.isfinite(values).all() for values in self.channels().values())


@dataclass
class EnvLog:
    contact_normal: np.ndarray
    grip_force: np.ndarray
    object_pos: np.ndarray
    object_held: np.ndarray

    @classmethod
    def allocate(cls, ticks: int) -> "EnvLog":
        return cls(np.zeros(ticks), np.zeros(ticks), np.zeros(ticks), np.zeros(ticks, dtype=bool))

    def record(self, k: int, world):
        self.contact_normal[k] = world.contact_normal
        self.grip_force[k] = world.grip_force
        self.object_pos[k] = world.object_pos
        self.object_held[k] = world.object_held

    def take(self, index) -> "EnvLog":
        return EnvLog(*(getattr(self, name)[index] for name in ENV_CHANNELS))

    def copy(self) -> "EnvLog":
        return EnvLog(*(getattr(self, name).copy() for name in ENV_CHANNELS))


@dataclass
class TraceMeta:
    task: str = ""
    variant: str = ""
    ratio: float = 1.0
    seed: int | None = 0
    outcome: str = "unknown"
    label: float | None = None
    fault: bool = False
    trace_id: str = ""
    source: str = "teach"
    failure_reason: str = ""

    def __post_init__(self):
        if self.outcome not in OUTCOMES:
            raise ValueError(f"unknown outcome {self.outcome!r}")

    @property
    def success(self) -> bool:
        return self.outcome == "success"


@dataclass
class MotionTrace:
    leader: SideLog
    follower: SideLog
    env: EnvLog
    meta: TraceMeta = field(default_factory=TraceMeta)
    dt: float = SAMPLE_PERIOD

    @classmethod
    def allocate(cls, ticks: int, n_joints: int, meta: TraceMeta | None = None, dt: float = SAMPLE_PERIOD):
        return cls(SideLog.allocate(ticks, n_joints), SideLog.allocate(ticks, n_joints), EnvLog.allocate(ticks), meta or TraceMeta(), dt)

    @property
    def n_ticks(self) -> int:
        return int(self.follower.theta.shape[0])

    @property
    def n_joints(self) -> int:
        return int(self.follower.theta.shape[1])

    @property
    def duration(self) -> float:
        return self.n_ticks * self.dt

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_ticks) * self.dt

    def take(self, index) -> "MotionTrace":
        return MotionTrace(self.leader.take(index), self.follower.take(index), self.env.take(index), replace(self.meta), self.dt)

    def truncate(self, ticks: int) -> "MotionTrace":
        return self.take(slice(0, ticks))

    def copy(self) -> "MotionTrace":
        return MotionTrace(self.leader.copy(), self.follower.copy(), self.env.copy(), replace(self.meta), self.dt)

    def is_finite(self) -> bool:
        return self.leader.is_finite() and self.follower.is_finite()

    def with_meta(self, **changes) -> "MotionTrace":
        return MotionTrace(self.leader, self.follower, self.env, replace(self.meta, **changes), self.dt)
