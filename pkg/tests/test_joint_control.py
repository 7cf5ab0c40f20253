import logging

import numpy as np
import pytest

from config.defaults import ARM_DEFAULTS
from joint_control.controller import ControllerFault, ControllerSettings, GainSet, JointServo, hybrid_control
from joint_control.observer import dob_update, init_observer, observe, rfob_update
from sim_world.physics import step_dynamics
from sim_world.state import ArmModel, CommandFrame, ContactModel, JointState, WorldState

DT = 0.002


@pytest.fixture
def nominal_arm():
    return ArmModel.from_settings({"inertia": ARM_DEFAULTS["nominal_inertia"]})


def hold_settings(kf=0.0):
    gains = GainSet(np.full(3, 400.0), np.full(3, 40.0), np.full(3, kf))
    return ControllerSettings(gains, cutoff=100.0, dt=DT)


def test_rfob_recovers_constant_external_torque_on_nominal_plant(nominal_arm):
    external = np.array([0.5, -0.3, 0.1])
    pose = np.array([0.3, 0.2, 4.0])
    world = WorldState.initial(nominal_arm, pose)
    servo = JointServo(nominal_arm, hold_settings(), pose)
    hold = CommandFrame(pose, np.zeros(3), np.zeros(3))
    for _ in range(500):
        res = servo.sense(world.theta, world.omega)
        world = step_dynamics(world, servo.command(hold, res), DT, external=external)
    res = servo.sense(world.theta, world.omega)
    np.testing.assert_allclose(res.tau, -external, atol=1e-9)
    np.testing.assert_allclose(world.theta, pose, atol=1e-3)


def test_dob_sees_gravity_and_load_together(nominal_arm):
    external = np.array([0.5, 0.0, 0.0])
    pose = np.array([0.3, 0.0, 4.0])
    world = WorldState.initial(nominal_arm, pose)
    servo = JointServo(nominal_arm, hold_settings(), pose)
    hold = CommandFrame(pose, np.zeros(3), np.zeros(3))
    for _ in range(1500):
        res = servo.sense(world.theta, world.omega)
        world = step_dynamics(world, servo.command(hold, res), DT, external=external)
    expected = -(external + nominal_arm.gravity_torque(world.theta)) + nominal_arm.friction(world.omega)
    np.testing.assert_allclose(servo.disturbance, expected, atol=1e-4)


def test_lowpass_filters_step_input(nominal_arm):
    obs = init_observer(nominal_arm, np.zeros(3), np.zeros(3), 100.0, DT, settle_gravity=False)
    estimates = []
    for _ in range(200):
        estimate, obs = dob_update(obs, np.ones(3), np.zeros(3), DT)
        estimates.append(estimate[0])
    assert estimates[0] == pytest.approx(0.2 / 2.2)
    assert all(a < b for a, b in zip(estimates[:50], estimates[1:50]))
    assert estimates[-1] == pytest.approx(1.0, abs=1e-9)


def test_rfob_removes_modelled_friction_and_gravity(nominal_arm):
    theta, omega = np.array([0.4, 0.0, 4.0]), np.array([0.2, 0.3, 0.0])
    obs = init_observer(nominal_arm, theta, omega, 100.0, DT)
    sample = -nominal_arm.friction(omega) + nominal_arm.gravity_torque(theta)
    estimate, _ = rfob_update(obs, np.zeros(3), omega, DT)
    np.testing.assert_allclose(estimate, (0.2 / 2.2) * sample)


def test_observe_advances_previous_state(nominal_arm):
    obs = init_observer(nominal_arm, np.zeros(3), np.zeros(3), 100.0, DT)
    _, _, obs = observe(obs, [0.1, 0.2, 4.0], [1.0, 2.0, 0.0])
    np.testing.assert_array_equal(obs.theta_prev, [0.1, 0.2, 4.0])
    np.testing.assert_array_equal(obs.omega_prev, [1.0, 2.0, 0.0])


def test_observer_cutoff_must_be_stable(nominal_arm):
    with pytest.raises(ValueError):
        init_observer(nominal_arm, np.zeros(3), np.zeros(3), 500.0, DT)
    with pytest.raises(ValueError):
        init_observer(nominal_arm, np.zeros(3), np.zeros(3), 0.0, DT)


def test_hybrid_control_law(nominal_arm):
    gains = GainSet(np.array([100.0, 200.0, 300.0]), np.array([20.0, 30.0, 40.0]), np.array([1.0, 0.5, 0.0]))
    obs = init_observer(nominal_arm, np.zeros(3), np.zeros(3), 100.0, DT, settle_gravity=False)
    cmd = CommandFrame(np.array([0.01, -0.02, 0.0]), np.array([0.1, 0.0, 0.0]), np.array([0.5, 0.2, 0.0]))
    res = JointState(np.zeros(3), np.zeros(3), np.array([0.1, 0.0, 0.0]))
    torque, obs = hybrid_control(cmd, res, gains, obs, DT)
    jn = nominal_arm.nominal_inertia
    accel = gains.kp * cmd.theta_ref + gains.kd * cmd.omega_ref + gains.kf / jn * (cmd.tau_ref - res.tau)
    np.testing.assert_allclose(torque, jn * accel)
    np.testing.assert_array_equal(obs.torque_prev, torque)


def test_hybrid_control_saturates(nominal_arm):
    obs = init_observer(nominal_arm, np.zeros(3), np.zeros(3), 100.0, DT, settle_gravity=False)
    cmd = CommandFrame(np.full(3, 100.0), np.zeros(3), np.zeros(3))
    torque, _ = hybrid_control(cmd, JointState.at_rest(np.zeros(3)), hold_settings().gains, obs, DT)
    np.testing.assert_array_equal(torque, nominal_arm.torque_limit)


def test_non_finite_command_raises_controller_fault(nominal_arm):
    servo = JointServo(nominal_arm, hold_settings(), np.zeros(3))
    res = servo.sense(np.zeros(3), np.zeros(3))
    with pytest.raises(ControllerFault):
        servo.command(CommandFrame(np.array([np.nan, 0.0, 0.0]), np.zeros(3), np.zeros(3)), res)


def test_underdamped_gains_warn(caplog):
    with caplog.at_level(logging.WARNING, logger="joint_control.controller"):
        GainSet.from_settings({"kp": [400.0, 400.0, 400.0], "kd": [10.0, 40.0, 40.0]})
    assert "Underdamped" in caplog.text
    with pytest.raises(ValueError):
        GainSet.from_settings({"kp": [0.0, 1.0, 1.0]})


def test_gains_without_position_keep_force_channel():
    gains = GainSet.from_settings().without_position()
    assert not gains.kp.any() and not gains.kd.any()
    np.testing.assert_array_equal(gains.kf, [1.0, 1.0, 1.0])


def test_controller_settings_from_overrides():
    settings = ControllerSettings.from_settings({"cutoff": 50.0, "kf": 2.0})
    assert settings.cutoff == 50.0
    np.testing.assert_array_equal(settings.gains.kf, [2.0, 2.0, 2.0])


def test_hybrid_control_rejects_mismatched_period(nominal_arm):
    obs = init_observer(nominal_arm, np.zeros(3), np.zeros(3), 100.0, DT)
    hold = CommandFrame(np.zeros(3), np.zeros(3), np.zeros(3))
    with pytest.raises(ValueError, match="period"):
        hybrid_control(hold, JointState.at_rest(np.zeros(3)), hold_settings().gains, obs, 0.001)


def run_servo(arm, settings, pose, cmd, ticks, contact=None, external=None, dob_enabled=True):
    world = WorldState.initial(arm, pose, contact)
    servo = JointServo(arm, settings, pose, dob_enabled=dob_enabled)
    thetas, responses = [], []
    for _ in range(ticks):
        res = servo.sense(world.theta, world.omega)
        world = step_dynamics(world, servo.command(cmd, res), DT, external=external)
        thetas.append(world.theta)
        responses.append(res.tau)
    return np.array(thetas), np.array(responses)


def test_position_step_overshoot_is_small(nominal_arm):
    pose = np.array([0.0, 0.0, 4.0])
    target = pose + 0.2
    thetas, _ = run_servo(nominal_arm, hold_settings(), pose, CommandFrame(target, np.zeros(3), np.zeros(3)), 500)
    overshoot = (thetas.max(axis=0) - target) / 0.2
    assert (overshoot < 0.02).all()
    np.testing.assert_allclose(thetas[-1], target, atol=1e-3)


def test_pure_force_servo_presses_wall_to_reference(nominal_arm):
    settings = ControllerSettings(GainSet(np.zeros(3), np.zeros(3), np.ones(3)), cutoff=100.0, dt=DT)
    wall = ContactModel.from_settings(0.6, "stiff")
    cmd = CommandFrame(np.zeros(3), np.zeros(3), np.array([5.0, 0.0, 0.0]))
    thetas, responses = run_servo(nominal_arm, settings, [0.6, 0.0, 4.0], cmd, 500, contact=wall)
    assert responses[-1, 0] == pytest.approx(5.0, rel=0.05)
    assert thetas[-1, 0] - 0.6 == pytest.approx(5.0 / wall.stiffness, rel=0.05)


def test_dob_removes_steady_error_under_load(nominal_arm):
    pose = np.array([0.3, 0.0, 4.0])
    hold = CommandFrame(pose, np.zeros(3), np.zeros(3))
    load = np.array([0.5, 0.0, 0.0])
    with_dob, _ = run_servo(nominal_arm, hold_settings(), pose, hold, 1500, external=load)
    without_dob, _ = run_servo(nominal_arm, hold_settings(), pose, hold, 1500, external=load, dob_enabled=False)
    sag = abs(without_dob[-1, 0] - pose[0])
    assert sag == pytest.approx((0.5 + 2.0 * np.cos(0.3)) / (0.2 * 400.0), rel=0.05)
    assert abs(with_dob[-1, 0] - pose[0]) <= 0.05 * sag


def test_dob_attenuates_fast_disturbances_like_first_order_lowpass(nominal_arm):
    cutoff = 100.0
    for frequency in (3 * cutoff, 4 * cutoff):
        obs = init_observer(nominal_arm, np.zeros(3), np.zeros(3), cutoff, DT, settle_gravity=False)
        times = np.arange(1500) * DT
        estimates = []
        for t in times:
            estimate, obs = dob_update(obs, np.full(3, np.sin(frequency * t)), np.zeros(3), DT)
            estimates.append(estimate[0])
        basis = np.column_stack([np.sin(frequency * times), np.cos(frequency * times)])[500:]
        coeffs, *_ = np.linalg.lstsq(basis, np.array(estimates)[500:], rcond=None)
        expected = abs(cutoff / (1j * frequency + cutoff))
        assert np.hypot(*coeffs) == pytest.approx(expected, rel=0.10)


def test_dob_is_linear_in_its_input(nominal_arm):
    rng = np.random.default_rng(8)
    first, second = rng.normal(size=(200, 3)), rng.normal(size=(200, 3))

    def filtered(torques):
        obs = init_observer(nominal_arm, np.zeros(3), np.zeros(3), 100.0, DT, settle_gravity=False)
        out = []
        for torque in torques:
            estimate, obs = dob_update(obs, torque, np.zeros(3), DT)
            out.append(estimate)
        return np.array(out)

    np.testing.assert_allclose(filtered(first + second), filtered(first) + filtered(second), atol=1e-12)
    np.testing.assert_allclose(filtered(2.5 * first), 2.5 * filtered(first), atol=1e-12)


def test_rfob_bias_bounded_by_inertia_mismatch():
    arm = ArmModel.from_settings().with_inertia_error([1.3, 1.3, 1.3])
    pose = np.array([0.3, 0.0, 4.0])
    external = np.array([0.5, -0.3, 0.1])
    world = WorldState.initial(arm, pose)
    servo = JointServo(arm, hold_settings(), pose)
    bias, accel = [], []
    for k in range(1000):
        res = servo.sense(world.theta, world.omega)
        bias.append(res.tau + external)
        swing = 0.1 * np.sin(2 * np.pi * k * DT)
        rate = 0.1 * 2 * np.pi * np.cos(2 * np.pi * k * DT)
        cmd = CommandFrame(pose + swing, np.full(3, rate), np.zeros(3))
        before = world.omega
        world = step_dynamics(world, servo.command(cmd, res), DT, external=external)
        accel.append((world.omega - before) / DT)
    bound = 0.3 * arm.nominal_inertia * np.abs(accel).max(axis=0)
    assert (np.abs(bias[100:]).max(axis=0) <= bound + 1e-6).all()
    assert (np.abs(bias[100:]).max(axis=0) > 0).all()
