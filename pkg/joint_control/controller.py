"""Hybrid PD position / P force controller with DOB compensation."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from config.defaults import GAIN_DEFAULTS, SAMPLE_PERIOD
from joint_control.observer import ObserverState, init_observer, observe
from sim_world.state import ArmModel, CommandFrame, JointState

LOG = logging.getLogger(__name__)


class ControllerFault(RuntimeError):
    """Non-finite command or response reached the controller."""


@dataclass(frozen=True)
class GainSet:
    kp: np.ndarray
    kd: np.ndarray
    kf: np.ndarray

    def __post_init__(self):
        if (self.kp < 0).any() or (self.kd < 0).any() or (self.kf < 0).any():
            raise ValueError("gains must be nonnegative")

    @classmethod
    def from_settings(cls, settings: dict | None = None, n_joints: int = 3) -> "GainSet":
        merged = {**GAIN_DEFAULTS, **(settings or {})}
        gains = cls(*(np.broadcast_to(np.asarray(merged[key], float), (n_joints,)).copy() for key in ("kp", "kd", "kf")))
        if (gains.kp <= 0).any() or (gains.kd <= 0).any():
            raise ValueError("position gains Kp and Kd must be positive")
        gains.warn_if_underdamped()
        return gains

    def underdamped(self) -> np.ndarray:
        return self.kd**2 < 4.0 * self.kp

    def warn_if_underdamped(self):
        joints = np.flatnonzero(self.underdamped())
        if joints.size:
            LOG.warning("Underdamped position gains on joints %s (Kd^2 < 4 Kp)", joints.tolist())

    def without_position(self) -> "GainSet":
        return replace(self, kp=np.zeros_like(self.kp), kd=np.zeros_like(self.kd))


@dataclass(frozen=True)
class ControllerSettings:
    gains: GainSet
    cutoff: float = GAIN_DEFAULTS["cutoff"]
    friction_mismatch: float = GAIN_DEFAULTS["friction_mismatch"]
    dt: float = SAMPLE_PERIOD

    @classmethod
    def from_settings(cls, settings: dict | None = None, n_joints: int = 3, dt: float = SAMPLE_PERIOD):
        merged = {**GAIN_DEFAULTS, **(settings or {})}
        return cls(GainSet.from_settings(merged, n_joints), float(merged["cutoff"]), float(merged["friction_mismatch"]), dt)


def hybrid_control(
    cmd: CommandFrame, res: JointState, gains: GainSet, obs: ObserverState, dt: float
) -> tuple[np.ndarray, ObserverState]:
    """Motor torque ``Jn*a + tau_dis`` for the acceleration reference

    ``a = Kp (theta_ref - theta) + Kd (omega_ref - omega) + (Kf / Jn) (tau_ref - tau)``.

    The returned observer records the applied (saturated) torque for the next
    observation.
    """
    if not math.isclose(dt, obs.dt):
        raise ValueError(f"control period {dt} does not match the observer period {obs.dt}")
    if not (cmd.is_finite() and res.is_finite()):
        raise ControllerFault("non-finite command or response")
    jn = obs.nominal_inertia
    accel = (
        gains.kp * (cmd.theta_ref - res.theta)
        + gains.kd * (cmd.omega_ref - res.omega)
        + gains.kf / jn * (cmd.tau_ref - res.tau)
    )
    limit = obs.arm.torque_limit
    torque = np.clip(jn * accel + obs.disturbance, -limit, limit)
    return torque, replace(obs, torque_prev=torque)


class JointServo:
    """Stateful per-arm wrapper: observe the measured state, then compute the torque."""

    def __init__(self, arm: ArmModel, settings: ControllerSettings, theta, omega=None, dob_enabled: bool = True):
        self.settings = settings
        self.gains = settings.gains
        self.dob_enabled = dob_enabled
        omega = np.zeros_like(np.asarray(theta, float)) if omega is None else omega
        self.obs = init_observer(arm, theta, omega, settings.cutoff, settings.dt, settings.friction_mismatch)
        if not dob_enabled:
            self.obs = replace(self.obs, dob=replace(self.obs.dob, output=np.zeros(arm.n_joints)))

    def sense(self, theta, omega) -> JointState:
        """Response with tau set to the reaction-force estimate."""
        _, tau_reac, obs = observe(self.obs, theta, omega)
        if not self.dob_enabled:
            obs = replace(obs, dob=replace(obs.dob, output=np.zeros_like(obs.dob.output)))
        self.obs = obs
        return JointState(np.array(theta, dtype=float), np.array(omega, dtype=float), tau_reac)

    def command(self, cmd: CommandFrame, res: JointState) -> np.ndarray:
        torque, self.obs = hybrid_control(cmd, res, self.gains, self.obs, self.settings.dt)
        return torque

    @property
    def disturbance(self) -> np.ndarray:
        return self.obs.disturbance
