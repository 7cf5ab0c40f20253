"""Side-by-side comparison of a proposed-augmentation and a naive-augmentation evaluation."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
from scipy.stats import spearmanr

from dashboard.components import DashboardComponents
from rollout.evaluate import EvalReport

LOG = logging.getLogger(__name__)

MODES = ("proposed", "naive")


class ReportError(ValueError):
    """The two evaluations do not share a grid."""


def label_tracking_rho(report: EvalReport) -> float:
    """Spearman rank correlation of label against measurement over successful trials."""
    scatter = report.scatter_frame().dropna(subset=["measurement"])
    if len(scatter) < 2 or scatter["label"].nunique() < 2 or scatter["measurement"].nunique() < 2:
        return math.nan
    return float(spearmanr(scatter["label"], scatter["measurement"])[0])


def measured_span(report: EvalReport) -> tuple[float, float]:
    values = report.scatter_frame()["measurement"].dropna()
    return (float(values.min()), float(values.max())) if len(values) else (math.nan, math.nan)


def percentage_points(a: float, b: float) -> float:
    return 100.0 * (a - b)


@dataclass
class Comparison:
    task: str
    kind: str
    comparison: pd.DataFrame
    headline: pd.DataFrame
    failures: pd.DataFrame
    rho: dict[str, float] = field(default_factory=dict)

    def headline_value(self, name: str) -> float:
        return float(self.headline.loc[self.headline["metric"] == name, "value"].iloc[0])


class ReportManager:
    def __init__(self, colors=None):
        self.components = DashboardComponents(colors)

    @staticmethod
    def check_grids(proposed: EvalReport, naive: EvalReport):
        for name in ("task", "labels", "variants", "trials"):
            if getattr(proposed, name) != getattr(naive, name):
                raise ReportError(f"evaluation grids differ in {name}: {getattr(proposed, name)!r} vs {getattr(naive, name)!r}")
        cells = lambda report: sorted((r.variant, r.label, r.trial) for r in report.records)
        if cells(proposed) != cells(naive):
            raise ReportError("evaluation grids differ in their recorded trials")

    def compare(self, proposed: EvalReport, naive: EvalReport) -> Comparison:
        """Success tables, overall and interpolated deltas in percentage points, and label-tracking rho per mode."""
        self.check_grids(proposed, naive)
        reports = {"proposed": proposed, "naive": naive}

        left = proposed.summary_frame().rename(columns={"successes": "proposed_successes", "rate": "proposed_rate"})
        right = naive.summary_frame()[["label", "variant", "successes", "rate"]].rename(columns={"successes": "naive_successes", "rate": "naive_rate"})
        comparison = left.merge(right, on=["label", "variant"], how="left")
        comparison["delta_pp"] = 100.0 * (comparison["proposed_rate"] - comparison["naive_rate"])
        comparison = comparison[["label", "variant", "trials", "interpolated", "proposed_successes", "naive_successes", "proposed_rate", "naive_rate", "delta_pp"]]

        rho = {mode: label_tracking_rho(report) for mode, report in reports.items()}
        rows = []
        for mode, report in reports.items():
            rows.append((f"{mode}_success_rate", report.success_rate()))
            rows.append((f"{mode}_interpolated_success_rate", report.success_rate(interpolated_only=True)))
        rows.append(("overall_delta_pp", percentage_points(proposed.success_rate(), naive.success_rate())))
        rows.append(("interpolated_delta_pp", percentage_points(proposed.success_rate(True), naive.success_rate(True))))
        for mode in MODES:
            rows.append((f"{mode}_spearman_rho", rho[mode]))
        for mode, report in reports.items():
            low, high = measured_span(report)
            rows.append((f"{mode}_measured_min", low))
            rows.append((f"{mode}_measured_max", high))
        headline = pd.DataFrame(rows, columns=["metric", "value"])

        failures = self.failure_table(reports)
        LOG.info(
            "Comparison %s: overall %+.1f pp, interpolated %+.1f pp, rho proposed %.3f naive %.3f",
            proposed.task, rows[4][1], rows[5][1], rho["proposed"], rho["naive"],
        )
        return Comparison(proposed.task, proposed.kind, comparison, headline, failures, rho)

    @staticmethod
    def failure_table(reports: dict[str, EvalReport]) -> pd.DataFrame:
        rows = []
        for mode, report in reports.items():
            frame = report.trials_frame()
            failed = frame[~frame["success"].astype(bool)]
            for reason, count in failed.groupby("reason", sort=True).size().items():
                rows.append({"mode": mode, "reason": reason, "count": int(count)})
        return pd.DataFrame(rows, columns=["mode", "reason", "count"])

    def save(self, comparison: Comparison, proposed: EvalReport, naive: EvalReport, directory) -> list[Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = []
        for name, frame in (("comparison", comparison.comparison), ("headline", comparison.headline), ("failures", comparison.failures)):
            path = directory / f"{name}.csv"
            frame.to_csv(path, index=False, float_format="%.17g")
            paths.append(path)
        figures = [
            self.components.create_tracking_scatter({"proposed": proposed.scatter_frame(), "naive": naive.scatter_frame()}, proposed.span, comparison.kind),
            self.components.create_success_bars({"proposed": proposed.summary_frame(), "naive": naive.summary_frame()}),
        ]
        if len(comparison.failures):
            figures.append(self.components.create_failure_chart(comparison.failures))
        paths.append(self.components.write_html(figures, directory / "label_tracking.html"))
        return paths


def summarize(comparison: Comparison) -> str:
    """Plain-text headline for the terminal."""
    values = dict(zip(comparison.headline["metric"], comparison.headline["value"]))
    fmt = lambda value: "n/a" if value is None or (isinstance(value, float) and np.isnan(value)) else f"{value:.3g}"
    lines = [f"task {comparison.task} ({comparison.kind})"]
    for mode in MODES:
        lines.append(
            f"  {mode:<8} success {100 * values[f'{mode}_success_rate']:.1f}%  interpolated {100 * values[f'{mode}_interpolated_success_rate']:.1f}%  rho {fmt(values[f'{mode}_spearman_rho'])}"
        )
    lines.append(f"  delta overall {values['overall_delta_pp']:+.1f} pp, interpolated {values['interpolated_delta_pp']:+.1f} pp")
    return "\n".join(lines)
