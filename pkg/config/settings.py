"""Experiment configuration: one YAML file per task, validated with pydantic."""

from __future__ import annotations

import os
from pathlib import Path
from typing import Literal

import yaml
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from config.defaults import COMPLIANCE_CLASSES, GAIN_DEFAULTS, MAX_TEACH_DURATION, POLICY_DEFAULTS, POLICY_FACTOR, SAMPLE_PERIOD, SEED_NAMES, TASK_DEFAULTS, TRAIN_DEFAULTS
from utils.seeding import derive_seed


class ConfigError(ValueError):
    """Missing or invalid configuration; the message names the offending key path."""

    def __init__(self, message: str, key: str | None = None):
        self.key = key
        super().__init__(f"{key}: {message}" if key else message)


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class WorldSection(_Section):
    arm: dict = Field(default_factory=dict, description="Overrides of ARM_DEFAULTS (per-joint lists).")
    contact: dict = Field(default_factory=dict, description="Overrides of CONTACT_DEFAULTS.")
    operator: dict = Field(default_factory=dict, description="Overrides of OPERATOR_DEFAULTS (hand stiffness, jitter).")
    task: dict = Field(default_factory=dict, description="Overrides of the task table (zones, surfaces, demo durations).")


class ControllerSection(_Section):
    kp: list[float] = Field(default=GAIN_DEFAULTS["kp"], description="Position gains per joint.")
    kd: list[float] = Field(default=GAIN_DEFAULTS["kd"], description="Velocity gains per joint.")
    kf: list[float] = Field(default=GAIN_DEFAULTS["kf"], description="Force gains per joint.")
    cutoff: float = Field(default=GAIN_DEFAULTS["cutoff"], gt=0, description="DOB/RFOB cutoff in rad/s.")
    friction_mismatch: float = Field(default=GAIN_DEFAULTS["friction_mismatch"], gt=0, description="Scale of the modelled friction used by RFOB.")
    dt: float = Field(default=SAMPLE_PERIOD, gt=0, description="Control period in seconds.")


class TeachSection(_Section):
    variants: list[str] | None = Field(default=None, description="Variants to demonstrate; defaults to the task's training variants.")
    max_duration: float = Field(default=MAX_TEACH_DURATION, gt=0, description="Longest accepted demonstration in seconds.")


class AugmentSection(_Section):
    mode: Literal["proposed", "naive"] = Field(default="proposed", description="Real playback or time-rescaled copies.")
    ratios: list[float] | None = Field(default=None, description="Speed ratios; defaults to the task table.")
    per_ratio: int | None = Field(default=None, ge=1, description="Successful playbacks per (variant, ratio).")
    retry_cap: int | None = Field(default=None, ge=1, description="Attempt cap per (variant, ratio); defaults to 5 x per_ratio.")
    train_per_condition: int | None = Field(default=None, ge=1, description="Training traces per (variant, ratio); the rest validate.")
    factor: int = Field(default=POLICY_FACTOR, ge=1, description="Downsample-and-rearrange factor.")
    noise_scale: float = Field(default=TRAIN_DEFAULTS["noise_scale"], ge=0, description="Input noise std on normalised training inputs.")

    @model_validator(mode="after")
    def _check_counts(self):
        if self.ratios is not None and (not self.ratios or any(ratio <= 0 for ratio in self.ratios)):
            raise ValueError("ratios must be a non-empty list of positive numbers")
        if self.per_ratio is not None and self.retry_cap is not None and self.retry_cap < self.per_ratio:
            raise ValueError("retry_cap must be at least per_ratio")
        return self


class PolicySection(_Section):
    num_lstm_layers: int = Field(default=POLICY_DEFAULTS["num_lstm_layers"], ge=1)
    hidden_units: int = Field(default=POLICY_DEFAULTS["hidden_units"], ge=1)
    window: int = Field(default=POLICY_DEFAULTS["window"], ge=2, description="Truncated-BPTT window in 50 Hz steps.")
    batch_size: int = Field(default=POLICY_DEFAULTS["batch_size"], ge=1)


class TrainSection(_Section):
    learning_rate: float = Field(default=TRAIN_DEFAULTS["learning_rate"], ge=0)
    epochs: int = Field(default=TRAIN_DEFAULTS["epochs"], ge=1)
    beta1: float = Field(default=TRAIN_DEFAULTS["beta1"], ge=0, lt=1)
    beta2: float = Field(default=TRAIN_DEFAULTS["beta2"], ge=0, lt=1)
    epsilon: float = Field(default=TRAIN_DEFAULTS["epsilon"], gt=0)
    clip_norm: float = Field(default=TRAIN_DEFAULTS["clip_norm"], gt=0, description="Global gradient-norm clip.")
    log_every: int = Field(default=TRAIN_DEFAULTS["log_every"], ge=1)


class EvalSection(_Section):
    labels: list[float] | None = Field(default=None, description="Evaluation labels; defaults to the task table.")
    variants: list[str] | None = Field(default=None, description="Evaluation variants; defaults to the task table.")
    trials: int | None = Field(default=None, ge=1)
    timeout: float | None = Field(default=None, gt=0, description="Rollout timeout in seconds.")


class SeedSection(_Section):
    master: int = Field(default=0, ge=0, description="Seed every unset named seed is derived from.")
    teach: int | None = None
    playback: int | None = None
    noise: int | None = None
    init: int | None = None
    eval: int | None = None


class ExperimentConfig(_Section):
    task: Literal["pick", "wipe"]
    output_dir: Path | None = Field(default=None, description="Run directory; defaults to runs/<task>.")
    world: WorldSection = Field(default_factory=WorldSection)
    controller: ControllerSection = Field(default_factory=ControllerSection)
    teach: TeachSection = Field(default_factory=TeachSection)
    augment: AugmentSection = Field(default_factory=AugmentSection)
    policy: PolicySection = Field(default_factory=PolicySection)
    train: TrainSection = Field(default_factory=TrainSection)
    eval: EvalSection = Field(default_factory=EvalSection)
    seeds: SeedSection = Field(default_factory=SeedSection)

    @model_validator(mode="after")
    def _check_task_tables(self):
        base = {**TASK_DEFAULTS[self.task], **self.world.task}
        known = set(base["eval_variants"]) | set(base["train_variants"]) | set(base.get("surfaces", {}))
        if self.task == "pick":
            known |= set(COMPLIANCE_CLASSES)
        for variant in self.teach.variants or []:
            if variant not in base["train_variants"]:
                raise ValueError(f"teach variant {variant!r} is not a training variant")
        for variant in self.eval.variants or []:
            if variant not in known:
                raise ValueError(f"unknown eval variant {variant!r}")
        if self.retry_cap < self.per_ratio:
            raise ValueError("augment.retry_cap must be at least per_ratio")
        if self.train_per_condition > self.per_ratio:
            raise ValueError("train_per_condition cannot exceed per_ratio")
        return self

    @property
    def run_dir(self) -> Path:
        return self.output_dir if self.output_dir is not None else Path("runs") / self.task

    @property
    def per_ratio(self) -> int:
        return self.augment.per_ratio or int(self.task_params()["per_ratio"])

    @property
    def retry_cap(self) -> int:
        return self.augment.retry_cap or 5 * self.per_ratio

    @property
    def train_per_condition(self) -> int:
        return self.augment.train_per_condition or int(self.task_params()["train_per_condition"])

    def task_params(self) -> dict:
        """Task table with the world, augment and eval overrides folded in."""
        params = {**TASK_DEFAULTS[self.task], **self.world.task}
        if self.augment.ratios is not None:
            params["ratios"] = list(self.augment.ratios)
        if self.augment.per_ratio is not None:
            params["per_ratio"] = self.augment.per_ratio
        for key, name in (("labels", "labels"), ("variants", "eval_variants"), ("trials", "trials"), ("timeout", "timeout")):
            value = getattr(self.eval, key)
            if value is not None:
                params[name] = value
        return params

    def world_settings(self) -> dict:
        """Overrides in the shape `sim_world.tasks.resolve_settings` expects."""
        return {
            "arm": dict(self.world.arm),
            "contact": dict(self.world.contact),
            "operator": dict(self.world.operator),
            "task": self.task_params(),
        }

    def controller_settings(self) -> dict:
        return self.controller.model_dump()

    def teach_variants(self) -> list[str]:
        return list(self.teach.variants or self.task_params()["train_variants"])

    def seed(self, name: str) -> int:
        if name not in SEED_NAMES:
            raise ConfigError(f"unknown seed name {name!r}", "seeds")
        explicit = getattr(self.seeds, name)
        return int(explicit) if explicit is not None else derive_seed(self.seeds.master, name)

    def with_overrides(self, seed: int | None = None, out=None, mode: str | None = None) -> "ExperimentConfig":
        """Copy with CLI flags applied; a new master seed re-derives every unset named seed."""
        update = {}
        if seed is not None:
            update["seeds"] = self.seeds.model_copy(update={"master": int(seed)})
        if out is not None:
            update["output_dir"] = Path(out)
        if mode is not None:
            if mode not in ("proposed", "naive"):
                raise ConfigError(f"mode must be proposed or naive, got {mode!r}", "augment.mode")
            update["augment"] = self.augment.model_copy(update={"mode": mode})
        return self.model_copy(update=update)


def _key_path(location) -> str:
    return ".".join(str(part) for part in location) or "<root>"


def parse_config(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping")
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        error = exc.errors()[0]
        raise ConfigError(error["msg"], _key_path(error["loc"])) from None
    except KeyError as exc:
        raise ConfigError(f"unknown task table entry {exc}", "world.task") from None


def load_config(path=None) -> ExperimentConfig:
    """Read the YAML experiment file; without a path fall back to WORKBENCH_CONFIG."""
    load_dotenv()
    path = path or os.environ.get("WORKBENCH_CONFIG")
    if not path:
        raise ConfigError("no config file given (use --config or set WORKBENCH_CONFIG)")
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from None
    return parse_config(data or {})
