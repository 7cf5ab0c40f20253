"""Disturbance and reaction-force observers.

Both observers filter the torque the nominal model cannot explain,
``u_k - Jn * (w_{k+1} - w_k) / dt``, through a first-order low-pass with cutoff
g discretised by the bilinear transform. The reaction-force observer further
removes the modelled friction and gravity, leaving the environment's torque.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from sim_world.state import ArmModel


@dataclass(frozen=True)
class LowPassState:
    output: np.ndarray
    last_input: np.ndarray


@dataclass(frozen=True)
class ObserverState:
    cutoff: float
    dt: float
    arm: ArmModel
    friction_mismatch: float
    dob: LowPassState
    rfob: LowPassState
    theta_prev: np.ndarray
    omega_prev: np.ndarray
    torque_prev: np.ndarray

    @property
    def nominal_inertia(self) -> np.ndarray:
        return self.arm.nominal_inertia

    @property
    def disturbance(self) -> np.ndarray:
        return self.dob.output

    @property
    def reaction(self) -> np.ndarray:
        return self.rfob.output

    def model_friction(self, omega: np.ndarray) -> np.ndarray:
        return self.friction_mismatch * self.arm.friction(omega)


def init_observer(
    arm: ArmModel, theta, omega, cutoff: float, dt: float, friction_mismatch: float = 1.0, settle_gravity: bool = True
) -> ObserverState:
    """Observer at rest; the DOB starts at the modelled static disturbance so a held arm does not sag."""
    if cutoff <= 0 or cutoff * dt >= 1:
        raise ValueError(f"observer cutoff must satisfy 0 < g*dt < 1 (g={cutoff}, dt={dt})")
    theta = np.array(theta, dtype=float)
    omega = np.array(omega, dtype=float)
    start = -arm.gravity_torque(theta) if settle_gravity else np.zeros_like(theta)
    zeros = np.zeros_like(theta)
    return ObserverState(
        cutoff=float(cutoff),
        dt=float(dt),
        arm=arm,
        friction_mismatch=float(friction_mismatch),
        dob=LowPassState(start, start.copy()),
        rfob=LowPassState(zeros, zeros.copy()),
        theta_prev=theta,
        omega_prev=omega,
        torque_prev=zeros.copy(),
    )


def _lowpass(state: LowPassState, sample: np.ndarray, cutoff: float, dt: float) -> LowPassState:
    a = cutoff * dt
    output = (a * (sample + state.last_input) + (2.0 - a) * state.output) / (2.0 + a)
    return LowPassState(output, sample)


def _unexplained_torque(obs: ObserverState, motor_torque, omega, dt) -> np.ndarray:
    return np.asarray(motor_torque, float) - obs.nominal_inertia * (np.asarray(omega, float) - obs.omega_prev) / dt


def dob_update(obs: ObserverState, motor_torque, omega, dt: float) -> tuple[np.ndarray, ObserverState]:
    """Estimate of the total disturbance from the torque applied over the last step and the velocity it produced."""
    dob = _lowpass(obs.dob, _unexplained_torque(obs, motor_torque, omega, dt), obs.cutoff, dt)
    return dob.output, replace(obs, dob=dob)


def rfob_update(obs: ObserverState, motor_torque, omega, dt: float) -> tuple[np.ndarray, ObserverState]:
    sample = _unexplained_torque(obs, motor_torque, omega, dt)
    sample = sample - obs.model_friction(obs.omega_prev) + obs.arm.gravity_torque(obs.theta_prev)
    rfob = _lowpass(obs.rfob, sample, obs.cutoff, dt)
    return rfob.output, replace(obs, rfob=rfob)


def observe(obs: ObserverState, theta, omega) -> tuple[np.ndarray, np.ndarray, ObserverState]:
    """Run both observers on the newest sample and advance the stored previous state."""
    dt = obs.dt
    tau_dis, obs = dob_update(obs, obs.torque_prev, omega, dt)
    tau_reac, obs = rfob_update(obs, obs.torque_prev, omega, dt)
    obs = replace(obs, theta_prev=np.array(theta, dtype=float), omega_prev=np.array(omega, dtype=float))
    return tau_dis, tau_reac, obs
