"""World and operator builders for the pick-and-place and wiping tasks."""

from __future__ import annotations

from dataclasses import dataclass
from functools import partial

import numpy as np

from config.defaults import ARM_DEFAULTS, COMPLIANCE_CLASSES, CONTACT_DEFAULTS, OPERATOR_DEFAULTS, PICK_WAYPOINTS, TASK_DEFAULTS
from sim_world.operator import OperatorModel
from sim_world.state import ArmModel, ContactModel, TaskGeometry, WorldState

TASKS = tuple(TASK_DEFAULTS)
OPEN_GRIPPER = 4.3
CLOSED_GRIPPER = 3.0


def resolve_settings(task: str, settings: dict | None = None) -> dict:
    """Merge per-section overrides onto the built-in tables."""
    if task not in TASK_DEFAULTS:
        raise ValueError(f"unknown task {task!r}; expected one of {', '.join(TASKS)}")
    settings = settings or {}
    return {
        "arm": {**ARM_DEFAULTS, **settings.get("arm", {})},
        "contact": {**CONTACT_DEFAULTS, **settings.get("contact", {})},
        "operator": {**OPERATOR_DEFAULTS, **settings.get("operator", {})},
        "task": {**TASK_DEFAULTS[task], **settings.get("task", {})},
    }


def pick_waypoints(variant: str, params: dict) -> list[tuple[float, list[float]]]:
    duration = params["demo_durations"].get(variant, params["demo_durations"]["stiff"])
    scale = duration / PICK_WAYPOINTS[-1][0]
    start, target = params["start_zone"], params["target_zone"]
    waypoints = []
    for time, (lift, swing, grip) in PICK_WAYPOINTS:
        swing = start if swing < 0 else target
        waypoints.append((time * scale, [lift, swing, grip]))
    return waypoints


def wipe_waypoints(variant: str, params: dict) -> list[tuple[float, list[float]]]:
    """Press, grasp the eraser, then sweep the swing joint at the base frequency."""
    press = params["surfaces"][variant] + params["press_depth"]
    amplitude = params["wipe_amplitude"]
    half_period = 0.5 / params["base_frequency"]
    waypoints = [
        (0.0, [0.0, 0.0, OPEN_GRIPPER]),
        (1.0, [press, 0.0, OPEN_GRIPPER]),
        (1.5, [press, 0.0, OPEN_GRIPPER]),
        (2.3, [press, 0.0, CLOSED_GRIPPER]),
        (2.8, [press, 0.0, CLOSED_GRIPPER]),
    ]
    time = 2.8 + half_period / 2
    extremes = 2 * int(params["wipe_cycles"])
    for k in range(extremes):
        waypoints.append((time, [press, amplitude if k % 2 == 0 else -amplitude, CLOSED_GRIPPER]))
        time += half_period
    waypoints.append((time - half_period / 2, [press, 0.0, CLOSED_GRIPPER]))
    return waypoints


def rest_pose(task: str, settings: dict | None = None) -> np.ndarray:
    params = resolve_settings(task, settings)["task"]
    swing = params["start_zone"] if task == "pick" else 0.0
    return np.array([0.0, swing, OPEN_GRIPPER])


def build_operator(task: str, variant: str, settings: dict | None = None) -> OperatorModel:
    resolved = resolve_settings(task, settings)
    params, hand = resolved["task"], resolved["operator"]
    _check_variant(task, variant, params, teaching=True)
    waypoints = pick_waypoints(variant, params) if task == "pick" else wipe_waypoints(variant, params)
    return OperatorModel.from_waypoints(
        waypoints, hand["stiffness"], hand["damping"], hand["saturation"], jitter=hand["jitter"]
    )


def build_world(task: str, variant: str, settings: dict | None = None, seed: int | None = None, role: str = "follower") -> WorldState:
    """Fresh world at the rest pose.

    The leader world carries no environment. The follower world's nuisance
    parameters (object placement, board height) are drawn from `seed`; with no
    seed they sit at their nominal values.
    """
    resolved = resolve_settings(task, settings)
    params = resolved["task"]
    _check_variant(task, variant, params, teaching=False)
    arm = ArmModel.from_settings(resolved["arm"])
    theta = rest_pose(task, settings)
    meta = {"task": task, "variant": variant, "seed": seed, "role": role}
    if role == "leader":
        return WorldState.initial(arm, theta, meta=meta)
    if role != "follower":
        raise ValueError(f"unknown world role {role!r}")

    rng = np.random.default_rng(seed) if seed is not None else None
    contact_settings = {key: resolved["contact"][key] for key in CONTACT_DEFAULTS}
    if task == "pick":
        offset = rng.uniform(-1.0, 1.0) * params["placement_jitter"] if rng is not None else 0.0
        contact = ContactModel.from_settings(params["surface"], variant, contact_settings)
        geometry = TaskGeometry(
            kind="pick",
            start_zone=params["start_zone"],
            target_zone=params["target_zone"],
            zone_half_width=params["zone_half_width"],
            capture_half_width=params["capture_half_width"],
            grasp_height=params["grasp_height"],
        )
        return WorldState.initial(arm, theta, contact, geometry, object_pos=params["start_zone"] + offset, meta=meta)

    offset = rng.uniform(-1.0, 1.0) * params["surface_jitter"] if rng is not None else 0.0
    contact = ContactModel.from_settings(params["surfaces"][variant] + offset, params["eraser_class"], contact_settings)
    return WorldState.initial(arm, theta, contact, TaskGeometry(kind="wipe"), meta=meta)


def _check_variant(task: str, variant: str, params: dict, teaching: bool):
    if task == "pick":
        known = params["train_variants"] if teaching else list(COMPLIANCE_CLASSES)
        if variant not in known or variant not in COMPLIANCE_CLASSES:
            raise ValueError(f"unknown pick variant {variant!r}")
    elif variant not in params["surfaces"]:
        raise ValueError(f"unknown wipe variant {variant!r}")


@dataclass(frozen=True, eq=False)
class WorldFactory:
    """Follower-world builder for a task that can be shipped to worker processes."""

    task: str
    settings: dict | None = None

    def __call__(self, variant: str, seed: int | None = None) -> WorldState:
        return build_world(self.task, variant, self.settings, seed)

    def for_variant(self, variant: str):
        return partial(build_world, self.task, variant, self.settings)
