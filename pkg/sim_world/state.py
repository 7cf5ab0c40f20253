from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from config.defaults import ARM_DEFAULTS, COMPLIANCE_CLASSES, CONTACT_DEFAULTS


def _vec(values) -> np.ndarray:
    return np.array(values, dtype=float).reshape(-1)


@dataclass(frozen=True)
class JointState:
    """Per-joint angle (rad), velocity (rad/s) and reaction torque (N·m)."""

    theta: np.ndarray
    omega: np.ndarray
    tau: np.ndarray

    @classmethod
    def at_rest(cls, theta) -> "JointState":
        theta = _vec(theta)
        return cls(theta, np.zeros_like(theta), np.zeros_like(theta))

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.theta).all() and np.isfinite(self.omega).all() and np.isfinite(self.tau).all())


@dataclass(frozen=True)
class CommandFrame:
    theta_ref: np.ndarray
    omega_ref: np.ndarray
    tau_ref: np.ndarray

    def is_finite(self) -> bool:
        return bool(
            np.isfinite(self.theta_ref).all() and np.isfinite(self.omega_ref).all() and np.isfinite(self.tau_ref).all()
        )


@dataclass(frozen=True)
class ArmModel:
    nominal_inertia: np.ndarray
    inertia: np.ndarray
    viscous: np.ndarray
    coulomb: np.ndarray
    stribeck_torque: np.ndarray
    stribeck_velocity: np.ndarray
    gravity: np.ndarray
    lower_limit: np.ndarray
    upper_limit: np.ndarray
    torque_limit: np.ndarray
    friction_smoothing: float = 0.05

    def __post_init__(self):
        if (self.nominal_inertia <= 0).any() or (self.inertia <= 0).any():
            raise ValueError("inertias must be positive")
        error = np.abs(self.inertia - self.nominal_inertia) / self.nominal_inertia
        if (error > 0.3 + 1e-12).any():
            raise ValueError(f"true inertia deviates from nominal by more than 30%: {error.max():.3f}")
        if (self.stribeck_velocity <= 0).any() or self.friction_smoothing <= 0:
            raise ValueError("Stribeck and smoothing velocities must be positive")
        if (self.lower_limit >= self.upper_limit).any():
            raise ValueError("joint lower limits must be below upper limits")

    @classmethod
    def from_settings(cls, settings: dict | None = None) -> "ArmModel":
        merged = {**ARM_DEFAULTS, **(settings or {})}
        smoothing = float(merged.pop("friction_smoothing"))
        return cls(friction_smoothing=smoothing, **{key: _vec(value) for key, value in merged.items()})

    @property
    def n_joints(self) -> int:
        return int(self.nominal_inertia.shape[0])

    def friction(self, omega: np.ndarray) -> np.ndarray:
        """Coulomb + Stribeck + viscous friction; odd in velocity."""
        level = self.coulomb + self.stribeck_torque * np.exp(-((omega / self.stribeck_velocity) ** 2))
        return level * np.tanh(omega / self.friction_smoothing) + self.viscous * omega

    def gravity_torque(self, theta: np.ndarray) -> np.ndarray:
        return self.gravity * np.cos(theta)

    def with_inertia_error(self, factor) -> "ArmModel":
        return replace(self, inertia=self.nominal_inertia * _vec(factor))


@dataclass(frozen=True)
class ContactModel:
    """Joint-space contact: a surface met by the lift joint and an object squeezed by the gripper."""

    stiffness: float
    damping: float
    friction_coulomb: float
    friction_stribeck: float
    friction_velocity: float
    friction_viscous: float
    friction_smoothing: float
    surface: float
    compliance: str
    object_stiffness: float
    object_damping: float
    object_contact_angle: float
    hold_threshold: float
    tangential: bool = True

    def __post_init__(self):
        if self.stiffness < 0 or self.damping < 0 or self.object_stiffness < 0 or self.object_damping < 0:
            raise ValueError("contact stiffness and damping must be nonnegative")

    @classmethod
    def from_settings(cls, surface: float, compliance: str, settings: dict | None = None, tangential: bool = True):
        merged = {**CONTACT_DEFAULTS, **(settings or {})}
        if compliance not in COMPLIANCE_CLASSES:
            raise ValueError(f"unknown compliance class {compliance!r}")
        return cls(
            surface=float(surface),
            compliance=compliance,
            object_stiffness=float(COMPLIANCE_CLASSES[compliance]),
            tangential=tangential,
            **{key: float(value) for key, value in merged.items()},
        )

    def tangential_friction(self, normal: float, slip: float) -> float:
        """Friction on the swing joint; Stribeck in slip speed, so it is not proportional to it."""
        level = self.friction_coulomb + self.friction_stribeck * np.exp(-((slip / self.friction_velocity) ** 2))
        return normal * (level * np.tanh(slip / self.friction_smoothing) + self.friction_viscous * slip)


@dataclass(frozen=True)
class TaskGeometry:
    """Where the object starts and must end up (pick), or that an eraser is carried (wipe)."""

    kind: str
    start_zone: float = 0.0
    target_zone: float = 0.0
    zone_half_width: float = 0.0
    capture_half_width: float = 0.0
    grasp_height: float = 0.0


@dataclass(frozen=True)
class WorldState:
    arm: ArmModel
    theta: np.ndarray
    omega: np.ndarray
    tau_ext: np.ndarray
    time: float = 0.0
    tick: int = 0
    contact: ContactModel | None = None
    task: TaskGeometry | None = None
    object_pos: float = 0.0
    object_held: bool = False
    contact_normal: float = 0.0
    grip_force: float = 0.0
    fault: bool = False
    meta: dict = field(default_factory=dict, compare=False)

    @classmethod
    def initial(cls, arm: ArmModel, theta, contact=None, task=None, object_pos: float = 0.0, meta=None):
        theta = _vec(theta)
        if theta.shape[0] != arm.n_joints:
            raise ValueError("initial pose does not match the arm's joint count")
        zeros = np.zeros_like(theta)
        return cls(arm, theta, zeros, zeros.copy(), contact=contact, task=task, object_pos=float(object_pos), meta=dict(meta or {}))

    @property
    def n_joints(self) -> int:
        return self.arm.n_joints

    def joint_state(self) -> JointState:
        """Ground-truth state; tau is the true reaction torque (minus external torque)."""
        return JointState(self.theta.copy(), self.omega.copy(), -self.tau_ext)
