"""Fixed-step joint-space dynamics of the arm, its contacts and the carried object."""

from __future__ import annotations

import logging
from dataclasses import replace

import numpy as np

from sim_world.state import ContactModel, WorldState

LOG = logging.getLogger(__name__)

LIFT, SWING, GRIPPER = 0, 1, 2


class SimulationFault(RuntimeError):
    """Raised by callers that refuse to continue from a faulted world."""


def _gripper_engaged(world: WorldState) -> bool:
    task = world.task
    if task is None or world.n_joints <= GRIPPER:
        return False
    if task.kind == "wipe":
        return True
    if world.object_held:
        return True
    return _capturable(world, world.theta)


def _capturable(world: WorldState, theta: np.ndarray) -> bool:
    task = world.task
    return bool(
        abs(theta[SWING] - world.object_pos) <= task.capture_half_width and theta[LIFT] >= task.grasp_height
    )


def contact_forces(world: WorldState, contact: ContactModel | None = None) -> tuple[np.ndarray, float, float]:
    """Return (per-joint contact torque, surface normal torque, gripper squeeze torque)."""
    contact = contact if contact is not None else world.contact
    torque = np.zeros(world.n_joints)
    if contact is None:
        return torque, 0.0, 0.0

    normal = 0.0
    penetration = world.theta[LIFT] - contact.surface
    if penetration > 0:
        normal = max(0.0, contact.stiffness * penetration + contact.damping * world.omega[LIFT])
        torque[LIFT] = -normal
        if contact.tangential and normal > 0 and world.n_joints > SWING:
            torque[SWING] = -contact.tangential_friction(normal, world.omega[SWING])

    grip = 0.0
    if _gripper_engaged(world):
        squeeze = contact.object_contact_angle - world.theta[GRIPPER]
        if squeeze > 0:
            grip = max(0.0, contact.object_stiffness * squeeze - contact.object_damping * world.omega[GRIPPER])
            torque[GRIPPER] = grip
    return torque, float(normal), float(grip)


def contact_torque(world: WorldState, contact: ContactModel | None = None) -> np.ndarray:
    return contact_forces(world, contact)[0]


def step_dynamics(
    world: WorldState, motor_torques: np.ndarray, dt: float, external: np.ndarray | None = None
) -> WorldState:
    """Advance one semi-implicit Euler step.

    A non-finite torque or state leaves the previous state in place with the
    fault flag set.
    """
    if world.fault:
        return world
    arm = world.arm
    motor = np.asarray(motor_torques, dtype=float)
    if not np.isfinite(motor).all() or (external is not None and not np.isfinite(external).all()):
        LOG.warning("Non-finite torque at t=%.3f s; world faulted", world.time)
        return replace(world, fault=True)
    motor = np.clip(motor, -arm.torque_limit, arm.torque_limit)

    env, normal, grip = contact_forces(world)
    if external is not None:
        env = env + external
    accel = (motor + env - arm.friction(world.omega) + arm.gravity_torque(world.theta)) / arm.inertia
    omega = world.omega + dt * accel
    theta = world.theta + dt * omega

    low, high = theta < arm.lower_limit, theta > arm.upper_limit
    theta = np.where(low, arm.lower_limit, np.where(high, arm.upper_limit, theta))
    omega = np.where(low, np.maximum(omega, 0.0), np.where(high, np.minimum(omega, 0.0), omega))

    if not (np.isfinite(theta).all() and np.isfinite(omega).all()):
        LOG.warning("Non-finite state at t=%.3f s; world faulted", world.time)
        return replace(world, fault=True)

    object_pos, held = world.object_pos, world.object_held
    if world.task is not None and world.task.kind == "pick" and world.contact is not None:
        threshold = world.contact.hold_threshold
        held = (world.object_held or _capturable(world, world.theta)) and grip >= threshold
        if world.object_held and held:
            object_pos = object_pos + (theta[SWING] - world.theta[SWING])

    return replace(
        world,
        theta=theta,
        omega=omega,
        tau_ext=env,
        time=world.time + dt,
        tick=world.tick + 1,
        object_pos=float(object_pos),
        object_held=bool(held),
        contact_normal=normal,
        grip_force=grip,
    )


def mechanical_energy(world: WorldState) -> float:
    """Kinetic + gravity potential + energy stored in active contact springs."""
    arm = world.arm
    energy = 0.5 * float(np.sum(arm.inertia * world.omega**2)) - float(np.sum(arm.gravity * np.sin(world.theta)))
    contact = world.contact
    if contact is not None:
        penetration = world.theta[LIFT] - contact.surface
        if penetration > 0:
            energy += 0.5 * contact.stiffness * penetration**2
        if _gripper_engaged(world):
            squeeze = contact.object_contact_angle - world.theta[GRIPPER]
            if squeeze > 0:
                energy += 0.5 * contact.object_stiffness * squeeze**2
    return energy
