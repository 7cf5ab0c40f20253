"""Task success predicates and label-tracking measurements."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import detrend

from config.defaults import TASK_DEFAULTS
from datakit.trace import MotionTrace

SWING, GRIPPER = 1, 2

FAILURE_REASONS = (
    "timeout",
    "incomplete",
    "dropped_outside",
    "fault",
    "no_press",
    "no_grasp",
    "premature_oscillation",
    "no_wipe",
    "contact_lost",
)


class MetricError(ValueError):
    """A measurement was requested from a trace that cannot support it."""


@dataclass(frozen=True)
class TaskSpec:
    task: str
    kind: str
    variants: tuple[str, ...]
    labels: tuple[float, ...]
    trials: int
    timeout: float
    closed_threshold: float = 3.7
    base_frequency: float = 1.0
    target_zone: float = 0.0
    zone_half_width: float = 0.0
    train_ratios: tuple[float, ...] = (1.0,)
    demo_durations: tuple[float, ...] = ()
    hysteresis: float = 0.05
    press_hold: float = 0.2

    def __post_init__(self):
        if self.kind not in ("duration", "frequency"):
            raise ValueError(f"unknown task kind {self.kind!r}")
        if self.trials < 1 or any(label <= 0 for label in self.labels):
            raise ValueError("labels must be positive and trials at least 1")

    @classmethod
    def from_settings(cls, task: str, params: dict | None = None) -> "TaskSpec":
        params = {**TASK_DEFAULTS[task], **(params or {})}
        return cls(
            task=task,
            kind=params["kind"],
            variants=tuple(params["eval_variants"]),
            labels=tuple(float(label) for label in params["labels"]),
            trials=int(params["trials"]),
            timeout=float(params["timeout"]),
            closed_threshold=float(params["closed_threshold"]),
            base_frequency=float(params["base_frequency"]),
            target_zone=float(params.get("target_zone", 0.0)),
            zone_half_width=float(params.get("zone_half_width", 0.0)),
            train_ratios=tuple(float(ratio) for ratio in params["ratios"]),
            demo_durations=tuple(float(value) for value in params.get("demo_durations", {}).values()),
        )

    @property
    def interp_span(self) -> tuple[float, float]:
        low, high = min(self.train_ratios), max(self.train_ratios)
        if self.kind == "duration":
            return min(self.demo_durations) / high, max(self.demo_durations) / low
        return self.base_frequency * low, self.base_frequency * high

    def is_interpolated(self, label: float) -> bool:
        low, high = self.interp_span
        return low - 1e-9 <= label <= high + 1e-9

    def in_target_zone(self, position: float) -> bool:
        return abs(position - self.target_zone) <= self.zone_half_width


@dataclass(frozen=True)
class Outcome:
    success: bool
    reason: str = ""
    event_time: float | None = None

    @classmethod
    def failed(cls, reason: str) -> "Outcome":
        return cls(False, reason)


class ReversalDetector:
    """Direction reversals with hysteresis; the starting extreme is not a reversal."""

    def __init__(self, hysteresis: float):
        self.hysteresis = hysteresis
        self.direction = 0
        self.low = self.high = None
        self.extreme = None
        self.reversals: list[int] = []
        self._index = -1

    def update(self, value: float) -> bool:
        self._index += 1
        i = self._index
        if self.direction == 0:
            if self.low is None or value < self.low[1]:
                self.low = (i, value)
            if self.high is None or value > self.high[1]:
                self.high = (i, value)
            if value - self.low[1] >= self.hysteresis:
                self.direction, self.extreme = 1, (i, value)
            elif self.high[1] - value >= self.hysteresis:
                self.direction, self.extreme = -1, (i, value)
            return False
        if self.direction * (value - self.extreme[1]) > 0:
            self.extreme = (i, value)
            return False
        if self.direction * (self.extreme[1] - value) >= self.hysteresis:
            self.reversals.append(self.extreme[0])
            self.direction, self.extreme = -self.direction, (i, value)
            return True
        return False


def detect_reversals(signal: np.ndarray, hysteresis: float = 0.05) -> list[int]:
    detector = ReversalDetector(hysteresis)
    for value in np.asarray(signal, dtype=float):
        detector.update(value)
    return detector.reversals


def sustained_start(mask: np.ndarray, run: int) -> int | None:
    """First index that begins `run` consecutive True samples."""
    count = 0
    for i, flag in enumerate(mask):
        count = count + 1 if flag else 0
        if count >= run:
            return i - run + 1
    return None


def closed_ticks(trace: MotionTrace, threshold: float) -> int:
    return int(np.count_nonzero(trace.follower.theta[:, GRIPPER] < threshold))


def placement_event(trace: MotionTrace, spec: TaskSpec) -> tuple[int, bool] | None:
    """First held -> released transition as (tick, inside target zone)."""
    held = trace.env.object_held.astype(bool)
    released = np.flatnonzero(held[:-1] & ~held[1:]) + 1
    if released.size == 0:
        return None
    k = int(released[0])
    return k, spec.in_target_zone(float(trace.env.object_pos[k]))


@dataclass
class WipePhases:
    press: int | None = None
    grasp: int | None = None
    reversals: list[int] = field(default_factory=list)
    start: int | None = None


def wipe_phases(trace: MotionTrace, spec: TaskSpec) -> WipePhases:
    contact = trace.env.contact_normal > 0
    press = sustained_start(contact, max(1, int(round(spec.press_hold / trace.dt))))
    closed = np.flatnonzero(trace.follower.theta[:, GRIPPER] < spec.closed_threshold)
    grasp = int(closed[0]) if closed.size else None
    reversals = detect_reversals(trace.follower.theta[:, SWING], spec.hysteresis)
    phases = WipePhases(press, grasp, reversals)
    if press is not None and grasp is not None:
        after = [r for r in reversals if r > max(press, grasp)]
        phases.start = after[0] if after else None
    return phases


def assess_pick(trace: MotionTrace, spec: TaskSpec) -> Outcome:
    if trace.meta.fault:
        return Outcome.failed("fault")
    event = placement_event(trace, spec)
    if event is None:
        return Outcome.failed("timeout" if trace.duration >= spec.timeout - trace.dt / 2 else "incomplete")
    tick, inside = event
    if not inside:
        return Outcome.failed("dropped_outside")
    if tick * trace.dt > spec.timeout:
        return Outcome.failed("timeout")
    return Outcome(True, event_time=tick * trace.dt)


def assess_wipe(trace: MotionTrace, spec: TaskSpec) -> Outcome:
    if trace.meta.fault:
        return Outcome.failed("fault")
    if trace.n_ticks == 0:
        return Outcome.failed("incomplete")
    phases = wipe_phases(trace, spec)
    if phases.reversals:
        first = phases.reversals[0]
        if phases.press is None or first < phases.press or phases.grasp is None or first < phases.grasp:
            return Outcome.failed("premature_oscillation")
    if phases.press is None:
        return Outcome.failed("no_press")
    if phases.grasp is None:
        return Outcome.failed("no_grasp")
    if phases.start is None:
        return Outcome.failed("no_wipe")
    wiping = [r for r in phases.reversals if r >= phases.start]
    if len(wiping) < 2:
        return Outcome.failed("no_wipe")
    if not (trace.env.contact_normal[phases.start :] > 0).all():
        return Outcome.failed("contact_lost")
    return Outcome(True, event_time=phases.start * trace.dt)


def assess(trace: MotionTrace, spec: TaskSpec) -> Outcome:
    return assess_pick(trace, spec) if spec.task == "pick" else assess_wipe(trace, spec)


def success_pick(trace: MotionTrace, spec: TaskSpec) -> bool:
    return assess_pick(trace, spec).success


def success_wipe(trace: MotionTrace, spec: TaskSpec) -> bool:
    return assess_wipe(trace, spec).success


def measure_completion_time(trace: MotionTrace, spec: TaskSpec) -> float:
    outcome = assess_pick(trace, spec)
    if not outcome.success:
        raise MetricError(f"no completion time for a failed trace ({outcome.reason})")
    return outcome.event_time


def measure_grasp_duration(trace: MotionTrace, spec: TaskSpec) -> float:
    return closed_ticks(trace, spec.closed_threshold) * trace.dt


def reversal_frequency(signal: np.ndarray, dt: float, hysteresis: float = 0.05) -> float:
    """Mean oscillation frequency from the first to the last reversal of a detrended signal."""
    reversals = detect_reversals(detrend(np.asarray(signal, dtype=float)), hysteresis)
    if len(reversals) < 2:
        raise MetricError(f"need at least 2 direction reversals, found {len(reversals)}")
    n = len(reversals) - 1
    return n / (2.0 * (reversals[-1] - reversals[0]) * dt)


def measure_frequency(trace: MotionTrace, spec: TaskSpec) -> float:
    phases = wipe_phases(trace, spec)
    if phases.start is None:
        raise MetricError("trace has no wipe phase")
    return reversal_frequency(trace.follower.theta[phases.start :, SWING], trace.dt, spec.hysteresis)


class PickMonitor:
    """Flags the first held -> released transition as it happens."""

    def __init__(self, spec: TaskSpec, dt: float):
        self.held = False
        self.finished = False

    def update(self, contact_normal: float, theta: np.ndarray, held: bool):
        if self.held and not held:
            self.finished = True
        self.held = held


class WipeMonitor:
    """Tracks press, grasp and wipe onset tick by tick; finishes once contact is lost mid-wipe."""

    def __init__(self, spec: TaskSpec, dt: float):
        self.spec = spec
        self.press_run = max(1, int(round(spec.press_hold / dt)))
        self.run = 0
        self.press = None
        self.grasp = None
        self.detector = ReversalDetector(spec.hysteresis)
        self.wiping = False
        self.finished = False
        self._k = -1

    def update(self, contact_normal: float, theta: np.ndarray, held: bool):
        self._k += 1
        self.run = self.run + 1 if contact_normal > 0 else 0
        if self.press is None and self.run >= self.press_run:
            self.press = self._k - self.run + 1
        if self.grasp is None and theta[GRIPPER] < self.spec.closed_threshold:
            self.grasp = self._k
        if self.detector.update(theta[SWING]) and self.press is not None and self.grasp is not None:
            self.wiping = self.wiping or self.detector.reversals[-1] > max(self.press, self.grasp)
        if self.wiping and contact_normal <= 0:
            self.finished = True


def make_monitor(spec: TaskSpec, dt: float):
    return PickMonitor(spec, dt) if spec.task == "pick" else WipeMonitor(spec, dt)


def make_predicate(spec: TaskSpec):
    """Outcome callable bound to a task spec, picklable for worker processes."""
    return _BoundAssessor(spec)


@dataclass(frozen=True)
class _BoundAssessor:
    spec: TaskSpec

    def __call__(self, trace: MotionTrace) -> Outcome:
        return assess(trace, self.spec)
