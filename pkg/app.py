"""Teaching-playback workbench: teach -> augment (proposed | naive) -> train -> eval -> report."""

import argparse
import logging
import sys
from pathlib import Path

import pandas as pd

from bilateral.teaching import teach_episode, tracking_residuals
from config.settings import ConfigError, ExperimentConfig, load_config
from dashboard.report import ReportError, ReportManager, summarize
from datakit.dataset import DatasetError, add_input_noise, build_dataset, naive_augment
from datakit.dataset_io import load_dataset, save_dataset
from datakit.labels import LabelError, LabelSpec, attach_label
from datakit.trace import TraceMeta
from datakit.trace_io import TraceFormatError, load_trace, save_trace
from joint_control.controller import ControllerFault, ControllerSettings
from mocopy.playback import PlaybackShortfall, collect_playbacks
from policy.checkpoint import CheckpointFormatError, load_checkpoint, save_checkpoint
from policy.lstm import PolicyConfig, PolicyFault
from policy.train import TrainConfig, TrainingDiverged, train
from rollout.evaluate import EvalReport, evaluate
from rollout.metrics import MetricError, TaskSpec, make_predicate
from sim_world.physics import SimulationFault
from sim_world.tasks import WorldFactory, build_operator, build_world
from utils.database import ExperimentLedger
from utils.logging_setup import configure_logging
from utils.seeding import derive_seed

LOG = logging.getLogger(__name__)

EXIT_OK, EXIT_TASK_ERROR, EXIT_CONFIG_ERROR = 0, 1, 2
MODES = ("proposed", "naive")
MANIFEST_COLUMNS = ["variant", "ratio", "attempt", "seed", "success", "failure_reason", "label", "trace_file"]


class MissingInput(FileNotFoundError):
    """An input produced by an earlier command is not on disk."""


class DemonstrationFailed(RuntimeError):
    def __init__(self, variant, reason):
        self.variant = variant
        self.reason = reason
        super().__init__(f"teaching demonstration {variant!r} failed ({reason or 'unknown'})")


TASK_ERRORS = (
    SimulationFault,
    ControllerFault,
    PolicyFault,
    TraceFormatError,
    CheckpointFormatError,
    DatasetError,
    LabelError,
    MetricError,
    TrainingDiverged,
    PlaybackShortfall,
    ReportError,
    DemonstrationFailed,
)


class WorkbenchApp:
    def __init__(self, config: ExperimentConfig, jobs=1):
        """Resolve the task tables and controller once for every command"""
        self.config = config
        self.jobs = max(1, int(jobs or 1))
        self.task = config.task
        self.run_dir = Path(config.run_dir)
        self.settings = config.world_settings()
        params = config.task_params()
        try:
            self.spec = TaskSpec.from_settings(self.task, params)
            self.label_spec = LabelSpec.from_settings(params)
            self.controller = ControllerSettings.from_settings(config.controller_settings(), dt=config.controller.dt)
        except (KeyError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        self.ratios = [float(ratio) for ratio in params["ratios"]]
        self.worlds = WorldFactory(self.task, self.settings)

        self.commands = {
            "teach": self.cmd_teach,
            "augment": self.cmd_augment,
            "train": self.cmd_train,
            "eval": self.cmd_eval,
            "report": self.cmd_report,
            "pipeline": self.cmd_pipeline,
        }

    def mode_dir(self, mode):
        return self.run_dir / mode

    def require(self, path, hint):
        path = Path(path)
        if not path.is_file():
            raise MissingInput(f"{path} not found; {hint}")
        return path

    def ledger(self):
        return ExperimentLedger(self.run_dir / "ledger.sqlite")

    def run(self, command, mode=None):
        if command not in self.commands:
            raise ConfigError(f"unknown command {command!r}")
        LOG.info("Starting %s for task %s in %s", command, self.task, self.run_dir)
        if command in ("augment", "train", "eval"):
            result = self.commands[command](mode or self.config.augment.mode)
        else:
            result = self.commands[command]()
        LOG.info("Finished %s", command)
        return result

    def cmd_teach(self):
        """One bilateral demonstration per training variant, saved under demos/."""
        predicate = make_predicate(self.spec)
        teach_seed = self.config.seed("teach")
        rows = []
        for variant in self.config.teach_variants():
            seed = derive_seed(teach_seed, variant)
            operator = build_operator(self.task, variant, self.settings)
            leader = build_world(self.task, variant, self.settings, role="leader")
            follower = self.worlds(variant, seed)
            meta = TraceMeta(task=self.task, variant=variant, ratio=1.0, seed=seed, trace_id=variant, source="teach")
            duration = operator.episode_duration(seed)
            if duration > self.config.teach.max_duration:
                raise ConfigError(f"demonstration {variant!r} lasts {duration:.2f} s, over the cap", "teach.max_duration")
            trace = teach_episode(
                leader, follower, operator, duration, seed, self.controller, predicate, meta, max_duration=self.config.teach.max_duration
            )
            residuals = tracking_residuals(trace)
            LOG.info(
                "Demo %s: %.3f s, %s, position RMS %.4f rad, force RMS %.4f N·m (%.1f%% of peak)",
                variant, trace.duration, trace.meta.outcome, residuals.position_rms, residuals.force_rms, 100 * residuals.force_ratio,
            )
            if trace.meta.fault:
                raise SimulationFault(f"teaching demonstration {variant!r} faulted after {trace.n_ticks} ticks")
            if not trace.meta.success:
                raise DemonstrationFailed(variant, trace.meta.failure_reason)
            save_trace(trace, self.run_dir / "demos" / f"{variant}.trace")
            rows.append(
                {
                    "variant": variant,
                    "duration": trace.duration,
                    "position_rms": residuals.position_rms,
                    "force_rms": residuals.force_rms,
                    "force_ratio": residuals.force_ratio,
                }
            )
        summary = pd.DataFrame(rows)
        print(summary.to_string(index=False, float_format=lambda value: f"{value:.4g}"))
        return summary

    def load_demos(self):
        return [
            load_trace(self.require(self.run_dir / "demos" / f"{variant}.trace", "run `teach` first"))
            for variant in self.config.teach_variants()
        ]

    def cmd_augment(self, mode):
        if mode not in MODES:
            raise ConfigError(f"mode must be one of {', '.join(MODES)}", "augment.mode")
        demos = self.load_demos()
        if mode == "proposed":
            traces, rows, shortfall = self.collect_proposed(demos)
        else:
            traces, rows = self.collect_naive(demos)
            shortfall = {}
        directory = self.mode_dir(mode)
        directory.mkdir(parents=True, exist_ok=True)
        pd.DataFrame(rows, columns=MANIFEST_COLUMNS).to_csv(directory / "manifest.csv", index=False, float_format="%.17g")
        ledger = self.ledger()
        ledger.save_playbacks(self.task, mode, rows)
        ledger.close()
        if shortfall:
            raise PlaybackShortfall(shortfall)

        factor = self.config.augment.factor
        if mode == "proposed":
            dataset = build_dataset(traces, self.label_spec, None, self.config.train_per_condition, factor, task=self.task)
        else:
            dataset = naive_augment(demos, self.ratios, traces, self.label_spec, self.config.train_per_condition, factor)
        path = save_dataset(dataset, directory / "dataset.ds")
        print(f"{mode}: {sum(row['success'] for row in rows)} traces -> {len(dataset.sequences)} sequences {dataset.counts()} in {path}")
        return dataset

    def collect_proposed(self, demos):
        """Real playbacks of every demo at every ratio; failed attempts are kept on disk but not returned."""
        predicate = make_predicate(self.spec)
        playback_dir = self.mode_dir("proposed") / "playbacks"
        seed = self.config.seed("playback")
        successes, rows, shortfall = [], [], {}
        for demo in demos:
            collection = collect_playbacks(
                demo,
                self.ratios,
                self.config.per_ratio,
                predicate,
                self.config.retry_cap,
                seed,
                self.worlds.for_variant(demo.meta.variant),
                self.controller,
                self.jobs,
            )
            for trace in collection.successes:
                trace.meta.label = attach_label(trace, self.label_spec, trace.meta.ratio)
            attempts = sorted(collection.successes + collection.failures, key=lambda t: (t.meta.ratio, _attempt_index(t.meta.trace_id)))
            for trace in attempts:
                suffix = "" if trace.meta.success else "_failed"
                path = save_trace(trace, playback_dir / f"{trace.meta.trace_id}{suffix}.trace")
                rows.append(_manifest_row(trace, path.relative_to(self.run_dir)))
            successes += [trace for trace in attempts if trace.meta.success]
            for ratio, missing in collection.shortfall.items():
                if missing:
                    shortfall[ratio] = shortfall.get(ratio, 0) + missing
        return successes, rows, shortfall

    def collect_naive(self, demos):
        """Reference playbacks whose (variant, ratio, label) the naive copies take over."""
        manifest = self.require(self.mode_dir("proposed") / "manifest.csv", "run `augment --mode proposed` first")
        frame = pd.read_csv(manifest, keep_default_na=False)
        reference = [load_trace(self.require(self.run_dir / name, "rerun `augment --mode proposed`")) for name in frame.loc[frame["success"].astype(bool), "trace_file"]]
        rows = []
        for trace in reference:
            row = _manifest_row(trace, "")
            row["trace_file"] = f"naive_{trace.meta.trace_id}"
            rows.append(row)
        return reference, rows

    def cmd_train(self, mode):
        directory = self.mode_dir(mode)
        dataset = load_dataset(self.require(directory / "dataset.ds", f"run `augment --mode {mode}` first"))
        noisy = add_input_noise(dataset, self.config.augment.noise_scale, self.config.seed("noise"))
        policy_cfg = PolicyConfig(dataset.input_dim, dataset.output_dim, **self.config.policy.model_dump())
        train_cfg = TrainConfig(seed=self.config.seed("init"), **self.config.train.model_dump())
        result = train(noisy, policy_cfg, train_cfg)
        save_checkpoint(result.best, directory / "policy.ckpt")
        save_checkpoint(result.final, directory / "policy_final.ckpt", result.optimizer)
        result.loss_frame().to_csv(directory / "loss_curve.csv", index=False, float_format="%.17g")
        print(f"{mode}: best epoch {result.best_epoch}, final train loss {result.train_loss[-1]:.6g}")
        return result

    def cmd_eval(self, mode):
        directory = self.mode_dir(mode)
        params = load_checkpoint(self.require(directory / "policy.ckpt", f"run `train --mode {mode}` first"))
        report = evaluate(params, self.spec, self.worlds, self.controller, self.config.seed("eval"), self.jobs)
        report.save(directory)
        ledger = self.ledger()
        ledger.save_eval_trials(self.task, mode, report)
        ledger.close()
        print(f"{mode}: success {100 * report.success_rate():.1f}%, interpolated {100 * report.success_rate(interpolated_only=True):.1f}%")
        return report

    def cmd_report(self):
        reports = {
            mode: EvalReport.load(self.require(self.mode_dir(mode) / "eval_trials.csv", f"run `eval --mode {mode}` first").parent, self.spec)
            for mode in MODES
        }
        manager = ReportManager()
        comparison = manager.compare(reports["proposed"], reports["naive"])
        manager.save(comparison, reports["proposed"], reports["naive"], self.run_dir / "report")
        print(summarize(comparison))
        return comparison

    def cmd_pipeline(self):
        """Every stage from one config, both augmentation modes."""
        ledger_path = self.run_dir / "ledger.sqlite"
        if ledger_path.exists():
            ledger_path.unlink()
        self.cmd_teach()
        for mode in MODES:
            self.cmd_augment(mode)
        for mode in MODES:
            self.cmd_train(mode)
            self.cmd_eval(mode)
        return self.cmd_report()


def _attempt_index(trace_id):
    return int(trace_id.rsplit("_a", 1)[-1]) if "_a" in trace_id else 0


def _manifest_row(trace, trace_file):
    meta = trace.meta
    return {
        "variant": meta.variant,
        "ratio": meta.ratio,
        "attempt": _attempt_index(meta.trace_id),
        "seed": meta.seed,
        "success": meta.success,
        "failure_reason": meta.failure_reason,
        "label": meta.label,
        "trace_file": str(trace_file),
    }


def build_parser():
    parser = argparse.ArgumentParser(prog="workbench", description="Variable-speed teaching-playback workbench")
    parser.add_argument("command", choices=["teach", "augment", "train", "eval", "report", "pipeline"])
    parser.add_argument("--config", help="YAML experiment file (default: $WORKBENCH_CONFIG)")
    parser.add_argument("--mode", choices=MODES, help="augmentation mode for augment/train/eval")
    parser.add_argument("--seed", type=int, help="master seed for every unset named seed")
    parser.add_argument("--jobs", type=int, default=1, help="worker processes")
    parser.add_argument("--out", help="output directory")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    configure_logging()
    try:
        config = load_config(args.config).with_overrides(seed=args.seed, out=args.out, mode=args.mode)
        app = WorkbenchApp(config, jobs=args.jobs)
        app.run(args.command, args.mode)
    except (ConfigError, MissingInput) as exc:
        LOG.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except TASK_ERRORS as exc:
        LOG.error("%s failed: %s", args.command, exc)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TASK_ERROR
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
