"""Four-channel bilateral coupling and the teaching loop that records demonstrations."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from config.defaults import MAX_TEACH_DURATION
from datakit.trace import MotionTrace, TraceMeta
from joint_control.controller import ControllerFault, ControllerSettings, JointServo
from sim_world.operator import OperatorModel, operator_torque
from sim_world.physics import step_dynamics
from sim_world.state import CommandFrame, JointState, WorldState

LOG = logging.getLogger(__name__)

LIFT, GRIPPER = 0, 2


def bilateral_step(leader: JointState, follower: JointState) -> tuple[CommandFrame, CommandFrame]:
    """Cross-wire the responses: each arm tracks the other's position and the negated force.

    Channel gains are symmetric and applied by each arm's own servo.
    """
    if not (leader.is_finite() and follower.is_finite()):
        raise ControllerFault("non-finite response in bilateral step")
    leader_cmd = CommandFrame(follower.theta, follower.omega, -follower.tau)
    follower_cmd = CommandFrame(leader.theta, leader.omega, -leader.tau)
    return leader_cmd, follower_cmd


def teach_episode(
    leader_world: WorldState,
    follower_world: WorldState,
    op: OperatorModel,
    duration: float,
    seed: int | None,
    controller: ControllerSettings,
    predicate: Callable[[MotionTrace], object] | None = None,
    meta: TraceMeta | None = None,
    max_duration: float = MAX_TEACH_DURATION,
) -> MotionTrace:
    """Drive the leader with the operator model and record both arms at the control rate.

    A fault ends the episode early and flags the trace failed; otherwise the
    predicate decides the outcome. Durations past `max_duration` are rejected.
    """
    if not 0.0 <= duration <= max_duration:
        raise ValueError(f"teaching duration must be within [0, {max_duration}] s, got {duration}")
    dt = controller.dt
    ticks = int(round(duration / dt))
    meta = meta or TraceMeta(seed=seed)
    trace = MotionTrace.allocate(ticks, follower_world.n_joints, meta, dt)
    if ticks == 0:
        trace.meta.outcome, trace.meta.failure_reason = "failed", "incomplete"
        return trace

    leader_servo = JointServo(leader_world.arm, controller, leader_world.theta, leader_world.omega)
    follower_servo = JointServo(follower_world.arm, controller, follower_world.theta, follower_world.omega)
    lw, fw = leader_world, follower_world
    recorded = ticks
    for k in range(ticks):
        l_res = leader_servo.sense(lw.theta, lw.omega)
        f_res = follower_servo.sense(fw.theta, fw.omega)
        try:
            l_cmd, f_cmd = bilateral_step(l_res, f_res)
            u_l = leader_servo.command(l_cmd, l_res)
            u_f = follower_servo.command(f_cmd, f_res)
        except ControllerFault as exc:
            LOG.warning("Controller fault at tick %d of teaching: %s", k, exc)
            trace.meta.fault, recorded = True, k
            break
        hand = operator_torque(op, l_res, k * dt, seed)
        lw = step_dynamics(lw, u_l, dt, external=hand)
        fw = step_dynamics(fw, u_f, dt)
        trace.leader.record(k, l_cmd, l_res)
        trace.follower.record(k, f_cmd, f_res)
        trace.env.record(k, fw)
        if lw.fault or fw.fault:
            trace.meta.fault, recorded = True, k + 1
            break

    if recorded < ticks:
        trace = trace.truncate(recorded)
    return judge(trace, predicate)


def judge(trace: MotionTrace, predicate) -> MotionTrace:
    """Set outcome (and failure reason) from a predicate returning a bool or an Outcome."""
    if trace.meta.fault:
        trace.meta.outcome, trace.meta.failure_reason = "failed", "fault"
        return trace
    if predicate is None:
        return trace
    verdict = predicate(trace)
    success = bool(getattr(verdict, "success", verdict))
    trace.meta.outcome = "success" if success else "failed"
    trace.meta.failure_reason = "" if success else getattr(verdict, "reason", "predicate")
    return trace


@dataclass(frozen=True)
class TrackingResiduals:
    position_rms: float
    force_rms: float
    force_peak: float

    @property
    def force_ratio(self) -> float:
        return self.force_rms / self.force_peak if self.force_peak > 0 else 0.0


def tracking_residuals(trace: MotionTrace) -> TrackingResiduals:
    """Position-law RMS over the episode and force-law RMS over contact ticks.

    The force law is checked on the joints that carry contact: the lift joint
    while the surface pushes back and the gripper while it squeezes.
    """
    position_rms = float(np.sqrt(np.mean((trace.follower.theta - trace.leader.theta) ** 2))) if trace.n_ticks else 0.0
    residuals, peaks = [], []
    for joint, active in ((LIFT, trace.env.contact_normal > 0), (GRIPPER, trace.env.grip_force > 0)):
        if joint >= trace.n_joints or not active.any():
            continue
        tau_f = trace.follower.tau[active, joint]
        tau_l = trace.leader.tau[active, joint]
        residuals.append(tau_f + tau_l)
        peaks.append(np.max(np.abs(tau_f)))
    if not residuals:
        return TrackingResiduals(position_rms, 0.0, 0.0)
    ratios = [float(np.sqrt(np.mean(r**2))) / p if p > 0 else 0.0 for r, p in zip(residuals, peaks)]
    worst = int(np.argmax(ratios))
    return TrackingResiduals(position_rms, float(np.sqrt(np.mean(residuals[worst] ** 2))), float(peaks[worst]))
