"""Task labels attached to successful traces."""

from __future__ import annotations

from dataclasses import dataclass

from config.defaults import ARM_DEFAULTS
from datakit.trace import MotionTrace

GRIPPER = 2


class LabelError(ValueError):
    """A trace cannot be labelled (for example the gripper never closes)."""


@dataclass(frozen=True)
class LabelSpec:
    kind: str
    closed_threshold: float = 3.7
    base_frequency: float = 1.0

    def __post_init__(self):
        if self.kind not in ("duration", "frequency"):
            raise ValueError(f"unknown label kind {self.kind!r}")
        low, high = ARM_DEFAULTS["lower_limit"][GRIPPER], ARM_DEFAULTS["upper_limit"][GRIPPER]
        if not low <= self.closed_threshold <= high:
            raise ValueError(f"closed threshold {self.closed_threshold} outside the gripper range [{low}, {high}]")
        if self.base_frequency <= 0:
            raise ValueError("base frequency must be positive")

    @classmethod
    def from_settings(cls, params: dict) -> "LabelSpec":
        return cls(params["kind"], float(params["closed_threshold"]), float(params["base_frequency"]))


def attach_label(trace: MotionTrace, spec: LabelSpec, ratio: float) -> float:
    """Closed-gripper time in seconds (duration task) or base frequency times ratio (frequency task).

    Failed or faulted traces are refused; unjudged ones are labelled as recorded.
    """
    if trace.meta.fault or trace.meta.outcome == "failed":
        raise LabelError(f"trace {trace.meta.trace_id!r} did not succeed ({trace.meta.failure_reason or 'fault'})")
    if spec.kind == "frequency":
        return spec.base_frequency * float(ratio)
    closed = int((trace.follower.theta[:, GRIPPER] < spec.closed_threshold).sum()) if trace.n_ticks else 0
    if closed == 0:
        raise LabelError(f"gripper never closes below {spec.closed_threshold} rad in trace {trace.meta.trace_id!r}")
    return closed * trace.dt
