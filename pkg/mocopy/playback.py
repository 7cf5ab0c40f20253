"""Motion-copying playback: replay recorded leader data, optionally time-rescaled, against the real follower world."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from bilateral.teaching import judge
from datakit.trace import ENV_CHANNELS, SIDE_CHANNELS, EnvLog, MotionTrace, SideLog, TraceMeta
from joint_control.controller import ControllerFault, ControllerSettings, JointServo
from sim_world.physics import step_dynamics
from sim_world.state import CommandFrame, WorldState
from utils.parallel import run_parallel
from utils.seeding import derive_seed

LOG = logging.getLogger(__name__)


class PlaybackShortfall(RuntimeError):
    """Some speed ratios ran out of attempts before reaching their success quota."""

    def __init__(self, shortfall: dict[float, int]):
        self.shortfall = dict(shortfall)
        details = ", ".join(f"x{ratio:g}: {missing} missing" for ratio, missing in sorted(self.shortfall.items()))
        super().__init__(f"playback retry cap exhausted ({details})")


@dataclass(frozen=True)
class SpeedRatio:
    ratio: float

    def __post_init__(self):
        if not (math.isfinite(self.ratio) and self.ratio > 0):
            raise ValueError(f"speed ratio must be a positive number, got {self.ratio}")

    def __float__(self) -> float:
        return float(self.ratio)


@dataclass
class CommandStream:
    """Leader-side frames replayed as follower commands."""

    leader: SideLog
    dt: float
    ratio: float = 1.0
    source_ticks: int = 0

    @property
    def n_ticks(self) -> int:
        return int(self.leader.theta.shape[0])

    @property
    def duration(self) -> float:
        return self.n_ticks * self.dt

    def frame(self, k: int) -> CommandFrame:
        return self.leader.response_as_command(k)


def resample_positions(n_source: int, ratio: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Source sample pairs and blend weights for output ticks reading source time k*dt*ratio."""
    if n_source <= 0:
        raise ValueError("cannot resample an empty trace")
    ratio = float(SpeedRatio(float(ratio)))
    n_out = math.ceil(n_source / ratio)
    position = np.minimum(np.arange(n_out) * ratio, n_source - 1)
    lower = np.minimum(np.floor(position).astype(int), n_source - 1)
    upper = np.minimum(lower + 1, n_source - 1)
    return lower, upper, position - lower


def _lerp(values: np.ndarray, lower, upper, frac) -> np.ndarray:
    if values.ndim == 2:
        frac = frac[:, None]
    return values[lower] + frac * (values[upper] - values[lower])


def resample_side(side: SideLog, ratio: float, index=None) -> SideLog:
    lower, upper, frac = index if index is not None else resample_positions(side.theta.shape[0], ratio)
    columns = {}
    for name in SIDE_CHANNELS:
        values = _lerp(getattr(side, name), lower, upper, frac)
        columns[name] = values * ratio if name.startswith("omega") else values
    return SideLog(**columns)


def resample_trace(trace: MotionTrace, r: SpeedRatio | float) -> CommandStream:
    ratio = float(r)
    if trace.n_ticks == 0:
        raise ValueError("cannot resample an empty trace")
    return CommandStream(resample_side(trace.leader, ratio), trace.dt, ratio, trace.n_ticks)


def rescale_trace(trace: MotionTrace, r: SpeedRatio | float) -> MotionTrace:
    """Pure time rescale of the whole trace, commands and responses alike."""
    ratio = float(r)
    index = resample_positions(trace.n_ticks, ratio)
    lower, upper, frac = index
    env = EnvLog(
        *(
            _lerp(trace.env.object_held.astype(float), lower, upper, frac) >= 0.5
            if name == "object_held"
            else _lerp(getattr(trace.env, name), lower, upper, frac)
            for name in ENV_CHANNELS
        )
    )
    meta = TraceMeta(**{**trace.meta.__dict__, "ratio": trace.meta.ratio * ratio, "source": "naive"})
    return MotionTrace(resample_side(trace.leader, ratio, index), resample_side(trace.follower, ratio, index), env, meta, trace.dt)


def playback(
    follower_world: WorldState,
    stream: CommandStream,
    controller: ControllerSettings,
    predicate: Callable | None = None,
    meta: TraceMeta | None = None,
) -> MotionTrace:
    """Follower servo against stored frames with no feedback into the commands."""
    dt = controller.dt
    ticks = stream.n_ticks
    trace = MotionTrace(
        stream.leader.copy(),
        SideLog.allocate(ticks, follower_world.n_joints),
        EnvLog.allocate(ticks),
        meta or TraceMeta(ratio=stream.ratio, source="playback"),
        dt,
    )
    servo = JointServo(follower_world.arm, controller, follower_world.theta, follower_world.omega)
    world, recorded = follower_world, ticks
    for k in range(ticks):
        res = servo.sense(world.theta, world.omega)
        cmd = stream.frame(k)
        try:
            torque = servo.command(cmd, res)
        except ControllerFault as exc:
            LOG.warning("Controller fault at tick %d of playback: %s", k, exc)
            trace.meta.fault, recorded = True, k
            break
        world = step_dynamics(world, torque, dt)
        trace.follower.record(k, cmd, res)
        trace.env.record(k, world)
        if world.fault:
            trace.meta.fault, recorded = True, k + 1
            break
    if recorded < ticks:
        trace = trace.truncate(recorded)
    return judge(trace, predicate)


@dataclass
class PlaybackCollection:
    successes: list[MotionTrace] = field(default_factory=list)
    failures: list[MotionTrace] = field(default_factory=list)
    attempts: dict[float, int] = field(default_factory=dict)
    shortfall: dict[float, int] = field(default_factory=dict)

    @property
    def complete(self) -> bool:
        return not any(self.shortfall.values())

    def raise_for_shortfall(self):
        if not self.complete:
            raise PlaybackShortfall({ratio: missing for ratio, missing in self.shortfall.items() if missing})


@dataclass(frozen=True)
class _RatioJob:
    trace: MotionTrace
    ratio: float
    per_ratio: int
    retry_cap: int
    seed: int
    world_factory: Callable
    controller: ControllerSettings
    predicate: Callable


def _collect_ratio(job: _RatioJob) -> tuple[list[MotionTrace], list[MotionTrace], int]:
    stream = resample_trace(job.trace, job.ratio)
    variant = job.trace.meta.variant
    successes, failures = [], []
    attempt = 0
    while len(successes) < job.per_ratio and attempt < job.retry_cap:
        attempt_seed = derive_seed(job.seed, variant, job.ratio, attempt)
        meta = TraceMeta(
            task=job.trace.meta.task,
            variant=variant,
            ratio=job.ratio,
            seed=attempt_seed,
            trace_id=f"{variant}_r{job.ratio:g}_a{attempt}",
            source="playback",
        )
        result = playback(job.world_factory(attempt_seed), stream, job.controller, job.predicate, meta)
        LOG.debug("Playback %s: %s %s", meta.trace_id, result.meta.outcome, result.meta.failure_reason)
        (successes if result.meta.success else failures).append(result)
        attempt += 1
    return successes, failures, attempt


def collect_playbacks(
    trace: MotionTrace,
    ratios,
    per_ratio: int,
    predicate: Callable,
    retry_cap: int,
    seed: int,
    world_factory: Callable,
    controller: ControllerSettings,
    jobs: int = 1,
) -> PlaybackCollection:
    """Replay `trace` at each ratio until `per_ratio` successes or `retry_cap` attempts.

    Every attempt starts from a fresh world whose nuisance parameters come from
    a seed derived from (seed, variant, ratio, attempt).
    """
    if per_ratio < 1 or retry_cap < per_ratio:
        raise ValueError(f"need 1 <= per_ratio <= retry_cap, got per_ratio={per_ratio}, retry_cap={retry_cap}")
    ratios = [float(SpeedRatio(float(ratio))) for ratio in ratios]
    jobs_list = [
        _RatioJob(trace, ratio, per_ratio, retry_cap, seed, world_factory, controller, predicate) for ratio in ratios
    ]
    collection = PlaybackCollection()
    for ratio, (successes, failures, attempts) in zip(ratios, run_parallel(_collect_ratio, jobs_list, jobs)):
        collection.successes.extend(successes)
        collection.failures.extend(failures)
        collection.attempts[ratio] = attempts
        collection.shortfall[ratio] = per_ratio - len(successes)
        LOG.info(
            "Playback %s x%g: %d/%d successes in %d attempts", trace.meta.variant, ratio, len(successes), per_ratio, attempts
        )
        if len(successes) < per_ratio:
            LOG.warning("Playback %s x%g fell %d short of its quota", trace.meta.variant, ratio, per_ratio - len(successes))
    return collection
