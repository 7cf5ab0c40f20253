import math

import numpy as np
import pandas as pd
import pytest

from datakit.dataset import NormStats
from joint_control.controller import ControllerSettings
from policy.lstm import PolicyConfig, zero_params
from rollout.episode import run_policy_episode
from rollout.evaluate import EvalReport, evaluate
from rollout.metrics import (
    MetricError,
    TaskSpec,
    WipeMonitor,
    assess_pick,
    assess_wipe,
    detect_reversals,
    measure_completion_time,
    measure_frequency,
    reversal_frequency,
    success_pick,
    success_wipe,
    wipe_phases,
)
from sim_world.tasks import WorldFactory, build_world

DT = 0.002
PICK = TaskSpec.from_settings("pick")
WIPE = TaskSpec.from_settings("wipe")


def sine(n_ticks, frequency=1.0, amplitude=0.3, start=0):
    t = (np.arange(n_ticks) - start) * DT
    return np.where(np.arange(n_ticks) >= start, amplitude * np.sin(2 * np.pi * frequency * t), 0.0)


@pytest.fixture
def pick_trace(make_trace):
    def factory(release_pos=0.5, n_ticks=1000, released=True, **meta):
        trace = make_trace(n_ticks, task="pick", **meta)
        trace.env.object_held[:] = False
        trace.env.object_held[100:300 if released else n_ticks] = True
        trace.env.object_pos[:] = -0.5
        trace.env.object_pos[300:] = release_pos
        return trace

    return factory


@pytest.fixture
def wipe_trace(make_trace):
    def factory(n_ticks=3000, contact=(100, None), grasp=200, swing_start=500):
        trace = make_trace(n_ticks, task="wipe")
        trace.env.contact_normal[:] = 0.0
        trace.env.contact_normal[contact[0] : contact[1]] = 5.0
        trace.follower.theta[:, 2] = 4.0
        trace.follower.theta[grasp:, 2] = 3.5
        trace.follower.theta[:, 1] = sine(n_ticks, start=swing_start)
        return trace

    return factory


def test_reversals_of_a_sine_ignore_small_noise():
    signal = sine(2500) + np.random.default_rng(0).uniform(-0.01, 0.01, 2500)
    reversals = detect_reversals(signal, 0.05)
    assert len(reversals) == 10
    assert abs(reversals[0] - 125) <= 5


@pytest.mark.parametrize("frequency", [0.5, 1.0, 1.5])
def test_reversal_frequency_recovers_sine_frequency(frequency):
    assert reversal_frequency(sine(3000, frequency), DT) == pytest.approx(frequency, rel=0.02)


def test_reversal_frequency_needs_two_reversals():
    with pytest.raises(MetricError):
        reversal_frequency(np.linspace(0.0, 1.0, 500), DT)


def test_interpolation_spans():
    assert PICK.interp_span == pytest.approx((3.3, 14.0))
    assert WIPE.interp_span == pytest.approx((0.5, 1.5))
    assert PICK.is_interpolated(4.5) and not PICK.is_interpolated(1.5) and not PICK.is_interpolated(15.0)
    assert WIPE.is_interpolated(1.5)


def test_pick_success_at_release_in_target_zone(pick_trace):
    trace = pick_trace()
    outcome = assess_pick(trace, PICK)
    assert outcome.success
    assert outcome.event_time == pytest.approx(300 * DT)
    assert measure_completion_time(trace, PICK) == pytest.approx(0.6)


def test_pick_failures(pick_trace):
    assert assess_pick(pick_trace(release_pos=0.0), PICK).reason == "dropped_outside"
    assert assess_pick(pick_trace(released=False), PICK).reason == "incomplete"
    assert assess_pick(pick_trace(fault=True), PICK).reason == "fault"
    short = TaskSpec.from_settings("pick", {"timeout": 2.0})
    assert assess_pick(pick_trace(released=False), short).reason == "timeout"
    with pytest.raises(MetricError):
        measure_completion_time(pick_trace(release_pos=0.0), PICK)


def test_wipe_success_and_phases(wipe_trace):
    trace = wipe_trace()
    phases = wipe_phases(trace, WIPE)
    assert (phases.press, phases.grasp, phases.start) == (100, 200, 625)
    outcome = assess_wipe(trace, WIPE)
    assert outcome.success
    assert outcome.event_time == pytest.approx(625 * DT)
    assert measure_frequency(trace, WIPE) == pytest.approx(1.0, rel=0.02)


def test_wipe_failures(wipe_trace):
    assert assess_wipe(wipe_trace(swing_start=0), WIPE).reason == "premature_oscillation"
    assert assess_wipe(wipe_trace(contact=(100, 2000)), WIPE).reason == "contact_lost"
    no_press = wipe_trace(contact=(0, 0), swing_start=3000)
    assert assess_wipe(no_press, WIPE).reason == "no_press"
    assert assess_wipe(wipe_trace(grasp=3000, swing_start=3000), WIPE).reason == "no_grasp"
    assert assess_wipe(wipe_trace(swing_start=3000), WIPE).reason == "no_wipe"


def test_success_predicates_follow_assessment(pick_trace, wipe_trace):
    assert success_pick(pick_trace(), PICK)
    assert not success_pick(pick_trace(release_pos=0.0), PICK)
    assert success_wipe(wipe_trace(), WIPE)
    assert not success_wipe(wipe_trace(swing_start=3000), WIPE)


def test_chirp_measures_its_mean_frequency(wipe_trace):
    trace = wipe_trace(n_ticks=5500)
    t = np.arange(5000) * DT
    chirp = 0.3 * np.sin(2 * np.pi * (0.5 * t + 0.05 * t**2))
    trace.follower.theta[:, 1] = 0.0
    trace.follower.theta[500:, 1] = chirp
    assert measure_frequency(trace, WIPE) == pytest.approx(1.0, rel=0.1)


def test_wipe_monitor_finishes_when_contact_lost(wipe_trace):
    trace = wipe_trace(contact=(100, 2000))
    monitor = WipeMonitor(WIPE, DT)
    finished_at = None
    for k in range(trace.n_ticks):
        monitor.update(trace.env.contact_normal[k], trace.follower.theta[k], False)
        if monitor.finished:
            finished_at = k
            break
    assert finished_at == 2000


@pytest.fixture
def idle_policy(identity_norm):
    cfg = PolicyConfig(input_dim=10, output_dim=18, num_lstm_layers=1, hidden_units=4)
    return zero_params(cfg, identity_norm())


def test_episode_runs_to_timeout_with_zero_order_hold(idle_policy):
    spec = TaskSpec.from_settings("pick", {"timeout": 0.5})
    result = run_policy_episode(build_world("pick", "stiff", seed=1), idle_policy, 4.5, spec, ControllerSettings.from_settings())
    assert result.trace.n_ticks == 250
    assert result.updates == 25
    assert result.outcome.reason == "timeout"
    assert math.isnan(result.measurement)
    held = result.trace.follower.theta_ref
    np.testing.assert_array_equal(held[0], held[9])


def test_episode_with_broken_normalisation_faults(idle_policy):
    idle_policy.norm = NormStats(np.full(10, np.nan), np.ones(10), np.zeros(18), np.ones(18))
    spec = TaskSpec.from_settings("pick", {"timeout": 0.5})
    result = run_policy_episode(build_world("pick", "stiff"), idle_policy, 4.5, spec, ControllerSettings.from_settings())
    assert not result.success
    assert result.outcome.reason == "fault"
    assert result.trace.n_ticks == 0


@pytest.fixture
def small_spec():
    return TaskSpec.from_settings("pick", {"labels": [3.0, 20.0], "eval_variants": ["stiff"], "trials": 2, "timeout": 0.1})


def test_evaluate_is_deterministic_and_exports(idle_policy, small_spec, tmp_path):
    controller = ControllerSettings.from_settings()
    report = evaluate(idle_policy, small_spec, WorldFactory("pick"), controller, seed=3)
    again = evaluate(idle_policy, small_spec, WorldFactory("pick"), controller, seed=3)
    assert len(report.records) == 4
    assert [r.seed for r in report.records] == [r.seed for r in again.records]
    assert report.success_rate() == 0.0
    assert math.isnan(report.success_rate(interpolated_only=True))
    summary = report.summary_frame()
    assert summary["trials"].tolist() == [2, 2]
    assert not summary["interpolated"].any()

    paths = report.save(tmp_path / "eval")
    assert [path.name for path in paths] == ["eval_trials.csv", "eval_summary.csv", "eval_scatter.csv"]
    loaded = EvalReport.load(tmp_path / "eval", small_spec)
    pd.testing.assert_frame_equal(loaded.trials_frame(), report.trials_frame())
    assert loaded.labels == [3.0, 20.0] and loaded.variants == ["stiff"]
