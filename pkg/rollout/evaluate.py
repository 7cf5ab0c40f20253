"""Evaluation grid over labels x variants x trials and its tabular exports."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import pandas as pd

from datakit.trace import TraceMeta
from joint_control.controller import ControllerSettings
from policy.lstm import PolicyParams
from rollout.episode import run_policy_episode
from rollout.metrics import TaskSpec
from utils.parallel import run_parallel
from utils.seeding import derive_seed

LOG = logging.getLogger(__name__)

TRIAL_COLUMNS = ["variant", "label", "trial", "seed", "success", "reason", "measurement", "grasp_duration", "ticks", "interpolated"]


@dataclass
class TrialRecord:
    variant: str
    label: float
    trial: int
    seed: int
    success: bool
    reason: str
    measurement: float
    grasp_duration: float
    ticks: int
    interpolated: bool


@dataclass
class EvalReport:
    task: str
    kind: str
    labels: list[float]
    variants: list[str]
    trials: int
    span: tuple[float, float]
    records: list[TrialRecord] = field(default_factory=list)

    def trials_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(record) for record in self.records], columns=TRIAL_COLUMNS)

    def summary_frame(self) -> pd.DataFrame:
        """One row per (label, variant): success count out of trials, as the result tables lay it out."""
        frame = self.trials_frame()
        rows = []
        for label in self.labels:
            for variant in self.variants:
                cell = frame[(frame["label"] == label) & (frame["variant"] == variant)]
                successes = int(cell["success"].sum())
                rows.append(
                    {
                        "label": label,
                        "variant": variant,
                        "successes": successes,
                        "trials": len(cell),
                        "rate": successes / len(cell) if len(cell) else math.nan,
                        "interpolated": bool(self.is_interpolated(label)),
                    }
                )
        return pd.DataFrame(rows, columns=["label", "variant", "successes", "trials", "rate", "interpolated"])

    def scatter_frame(self) -> pd.DataFrame:
        frame = self.trials_frame()
        return frame[frame["success"]][["variant", "label", "trial", "measurement", "grasp_duration"]].reset_index(drop=True)

    def is_interpolated(self, label: float) -> bool:
        return self.span[0] - 1e-9 <= label <= self.span[1] + 1e-9

    def success_rate(self, interpolated_only: bool = False) -> float:
        records = [r for r in self.records if r.interpolated or not interpolated_only]
        return sum(r.success for r in records) / len(records) if records else math.nan

    def save(self, directory) -> list[Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = [directory / "eval_trials.csv", directory / "eval_summary.csv", directory / "eval_scatter.csv"]
        for frame, path in zip((self.trials_frame(), self.summary_frame(), self.scatter_frame()), paths):
            frame.to_csv(path, index=False, float_format="%.17g")
        return paths

    @classmethod
    def load(cls, directory, spec: TaskSpec) -> "EvalReport":
        """Rebuild a report from its trials CSV."""
        frame = pd.read_csv(Path(directory) / "eval_trials.csv", keep_default_na=False, na_values=[""])
        report = cls(spec.task, spec.kind, sorted(frame["label"].unique().tolist()), list(dict.fromkeys(frame["variant"])), spec.trials, spec.interp_span)
        for row in frame.itertuples(index=False):
            report.records.append(
                TrialRecord(
                    row.variant, float(row.label), int(row.trial), int(row.seed), bool(row.success), str(row.reason) if isinstance(row.reason, str) else "",
                    float(row.measurement), float(row.grasp_duration), int(row.ticks), bool(row.interpolated),
                )
            )
        return report


@dataclass(frozen=True)
class _CellJob:
    params: PolicyParams
    spec: TaskSpec
    world_factory: object
    controller: ControllerSettings
    variant: str
    label: float
    seeds: tuple[int, ...]


def _run_cell(job: _CellJob) -> list[TrialRecord]:
    records = []
    for trial, seed in enumerate(job.seeds):
        meta = TraceMeta(task=job.spec.task, variant=job.variant, seed=seed, label=job.label, source="rollout")
        result = run_policy_episode(job.world_factory(job.variant, seed), job.params, job.label, job.spec, job.controller, meta)
        records.append(
            TrialRecord(
                job.variant, job.label, trial, seed, result.success, result.outcome.reason,
                result.measurement, result.grasp_duration, result.trace.n_ticks, job.spec.is_interpolated(job.label),
            )
        )
    return records


def evaluate(
    params: PolicyParams,
    spec: TaskSpec,
    world_factory,
    controller: ControllerSettings,
    seed: int,
    jobs: int = 1,
) -> EvalReport:
    """Every (label, variant) cell runs `spec.trials` seeded episodes; cells may run in parallel.

    `world_factory(variant, seed)` builds a fresh follower world. Trial seeds
    depend only on (seed, variant, label, trial), so two policies evaluated
    with the same seed face identical worlds.
    """
    cells = [
        _CellJob(params, spec, world_factory, controller, variant, label, tuple(derive_seed(seed, variant, label, trial) for trial in range(spec.trials)))
        for label in spec.labels
        for variant in spec.variants
    ]
    report = EvalReport(spec.task, spec.kind, list(spec.labels), list(spec.variants), spec.trials, spec.interp_span)
    for cell, records in zip(cells, run_parallel(_run_cell, cells, jobs)):
        report.records.extend(records)
        LOG.info("Eval %s label %g: %d/%d", cell.variant, cell.label, sum(r.success for r in records), len(records))
    return report

