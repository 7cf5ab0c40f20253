"""Slow end-to-end checks; run with WORKBENCH_BENCH=1."""

import statistics
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

import app
from bilateral.teaching import teach_episode, tracking_residuals
from datakit.dataset import Dataset, LabeledSequence
from datakit.trace import TraceMeta
from joint_control.controller import ControllerSettings
from mocopy.playback import playback, resample_trace, rescale_trace
from policy.lstm import PolicyConfig
from policy.train import TrainConfig, train
from rollout.metrics import TaskSpec, make_predicate
from sim_world.tasks import build_operator, build_world

pytestmark = pytest.mark.bench

CONFIG_DIR = Path(__file__).resolve().parent.parent / "config"
CONTROLLER = ControllerSettings.from_settings()
DEMOS = [("pick", "stiff"), ("pick", "soft"), ("wipe", "high"), ("wipe", "low")]


def teach(task, variant, seed=0):
    op = build_operator(task, variant)
    meta = TraceMeta(task=task, variant=variant, seed=seed, trace_id=variant)
    return teach_episode(
        build_world(task, variant, role="leader"),
        build_world(task, variant, seed=seed),
        op,
        op.episode_duration(seed),
        seed,
        CONTROLLER,
        make_predicate(TaskSpec.from_settings(task)),
        meta,
    )


def range_rmse(actual, reference):
    n = min(len(actual), len(reference))
    span = reference[:n].max(axis=0) - reference[:n].min(axis=0)
    return np.sqrt(np.mean((actual[:n] - reference[:n]) ** 2, axis=0)) / np.where(span > 0, span, 1.0)


@pytest.mark.parametrize("task, variant", DEMOS)
def test_bilateral_fidelity(task, variant):
    trace = teach(task, variant)
    assert trace.meta.success, trace.meta.failure_reason
    residuals = tracking_residuals(trace)
    assert residuals.position_rms <= 0.05
    assert residuals.force_ratio <= 0.10


@pytest.mark.parametrize("task, variant", DEMOS)
def test_unit_playback_reproduces_demo(task, variant):
    demo = teach(task, variant)
    replay = playback(build_world(task, variant, seed=0), resample_trace(demo, 1.0), CONTROLLER)
    assert (range_rmse(replay.follower.theta, demo.follower.theta) <= 0.05).all()
    fast = resample_trace(demo, 2.0)
    assert abs(fast.duration - 0.5 * demo.duration) <= demo.dt


def test_double_speed_wipe_departs_from_rescaled_demo():
    demo = teach("wipe", "high")
    real = playback(build_world("wipe", "high", seed=0), resample_trace(demo, 2.0), CONTROLLER)
    compressed = rescale_trace(demo, 2.0)
    assert range_rmse(real.follower.theta, compressed.follower.theta).max() >= 0.05


def test_single_sequence_overfit(identity_norm):
    rng = np.random.default_rng(0)
    inputs = np.cumsum(rng.normal(scale=0.1, size=(60, 10)), axis=0)
    targets = np.tanh(np.hstack([inputs, inputs[:, :8]]))
    dataset = Dataset("pick", 3, identity_norm(), [LabeledSequence(inputs, targets, "only", 1.0, 0, 1.0)])
    cfg = PolicyConfig(10, 18, num_lstm_layers=4, hidden_units=64, window=100, batch_size=1)
    result = train(dataset, cfg, TrainConfig(learning_rate=3e-3, epochs=1500, seed=0, log_every=500))
    assert min(result.train_loss) < 1e-3


def test_teach_is_deterministic(tmp_path):
    config = str(CONFIG_DIR / "pick.yaml")
    for run in ("a", "b"):
        assert app.main(["teach", "--config", config, "--out", str(tmp_path / run)]) == app.EXIT_OK
    for name in ("stiff.trace", "soft.trace"):
        assert (tmp_path / "a" / "demos" / name).read_bytes() == (tmp_path / "b" / "demos" / name).read_bytes()


def run_pipeline(task, seed, directory):
    assert app.main(["pipeline", "--config", str(CONFIG_DIR / f"{task}.yaml"), "--seed", str(seed), "--out", str(directory)]) == app.EXIT_OK
    headline = pd.read_csv(directory / "report" / "headline.csv")
    return dict(zip(headline["metric"], headline["value"]))


@pytest.fixture(scope="module")
def pick_runs(tmp_path_factory):
    return [run_pipeline("pick", seed, tmp_path_factory.mktemp(f"pick{seed}")) for seed in range(3)]


@pytest.fixture(scope="module")
def wipe_runs(tmp_path_factory):
    return [run_pipeline("wipe", seed, tmp_path_factory.mktemp(f"wipe{seed}")) for seed in range(3)]


def test_proposed_beats_naive_on_pick(pick_runs):
    for values in pick_runs:
        assert values["proposed_success_rate"] >= values["naive_success_rate"]
    assert statistics.median(values["interpolated_delta_pp"] for values in pick_runs) >= 15.0


def test_proposed_tracks_labels_at_least_as_well(pick_runs):
    for values in pick_runs:
        naive_rho = values["naive_spearman_rho"]
        assert np.isnan(naive_rho) or values["proposed_spearman_rho"] >= naive_rho


def test_proposed_wipe_frequency_span_is_wider(wipe_runs):
    proposed_low = statistics.median(values["proposed_measured_min"] for values in wipe_runs)
    proposed_high = statistics.median(values["proposed_measured_max"] for values in wipe_runs)
    naive_low = statistics.median(values["naive_measured_min"] for values in wipe_runs)
    naive_high = statistics.median(values["naive_measured_max"] for values in wipe_runs)
    assert proposed_low < naive_low and proposed_high > naive_high
