"""Closed-loop policy episodes: the network stands in for the leader at 50 Hz."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from config.defaults import POLICY_FACTOR
from datakit.trace import MotionTrace, TraceMeta
from joint_control.controller import ControllerFault, ControllerSettings, JointServo
from policy.lstm import LSTMState, PolicyFault, PolicyParams, predict_step
from rollout.metrics import Outcome, TaskSpec, assess, make_monitor, measure_completion_time, measure_frequency, measure_grasp_duration, MetricError
from sim_world.physics import step_dynamics
from sim_world.state import CommandFrame, JointState, WorldState

LOG = logging.getLogger(__name__)


@dataclass
class EpisodeResult:
    trace: MotionTrace
    outcome: Outcome
    updates: int
    measurement: float = math.nan
    grasp_duration: float = math.nan

    @property
    def success(self) -> bool:
        return self.outcome.success


def policy_command(params: PolicyParams, hidden: LSTMState | None, res: JointState, label: float):
    """Normalise (follower state, label), predict, and turn the leader estimate into a follower command."""
    norm = params.norm
    if norm is None:
        raise PolicyFault("policy has no normalisation statistics")
    x = norm.normalize_inputs(np.concatenate([res.theta, res.omega, res.tau, [float(label)]]))
    y, hidden = predict_step(params, hidden, x)
    out = norm.denormalize_targets(y)
    n = res.theta.shape[0]
    leader = JointState(out[3 * n : 4 * n], out[4 * n : 5 * n], out[5 * n : 6 * n])
    return CommandFrame(leader.theta, leader.omega, -leader.tau), leader, hidden


def run_policy_episode(
    world: WorldState,
    params: PolicyParams,
    label: float,
    spec: TaskSpec,
    controller: ControllerSettings,
    meta: TraceMeta | None = None,
) -> EpisodeResult:
    """Run until the task ends or the timeout, checking termination only at command updates.

    Commands are held for the POLICY_FACTOR - 1 ticks between updates. Controller
    or network faults end the episode as a failure.
    """
    dt = controller.dt
    max_ticks = int(round(spec.timeout / dt))
    trace = MotionTrace.allocate(max_ticks, world.n_joints, meta or TraceMeta(task=spec.task, label=float(label), source="rollout"), dt)
    servo = JointServo(world.arm, controller, world.theta, world.omega)
    monitor = make_monitor(spec, dt)
    hidden, cmd, leader = None, None, None
    updates, recorded = 0, max_ticks
    for k in range(max_ticks):
        if k % POLICY_FACTOR == 0 and (monitor.finished or world.fault):
            recorded = k
            break
        res = servo.sense(world.theta, world.omega)
        try:
            if k % POLICY_FACTOR == 0:
                cmd, leader, hidden = policy_command(params, hidden, res, label)
                updates += 1
            torque = servo.command(cmd, res)
        except (PolicyFault, ControllerFault) as exc:
            LOG.debug("Episode fault at tick %d: %s", k, exc)
            trace.meta.fault, recorded = True, k
            break
        world = step_dynamics(world, torque, dt)
        trace.leader.record(k, cmd, leader)
        trace.follower.record(k, cmd, res)
        trace.env.record(k, world)
        monitor.update(world.contact_normal, res.theta, world.object_held)
        if world.fault:
            trace.meta.fault, recorded = True, k + 1
            break
    if recorded < max_ticks:
        trace = trace.truncate(recorded)

    outcome = assess(trace, spec)
    trace.meta.outcome = "success" if outcome.success else "failed"
    trace.meta.failure_reason = outcome.reason
    result = EpisodeResult(trace, outcome, updates)
    if outcome.success:
        try:
            if spec.kind == "duration":
                result.measurement = measure_completion_time(trace, spec)
                result.grasp_duration = measure_grasp_duration(trace, spec)
            else:
                result.measurement = measure_frequency(trace, spec)
        except MetricError as exc:
            LOG.warning("Successful episode without a measurement: %s", exc)
    return result
