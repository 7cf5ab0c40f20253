"""Built-in parameter tables for the simulated arm, its environments and the two tasks.

Per-joint lists follow the joint order lift, swing, gripper. All values are SI
(rad, rad/s, N·m, kg·m², s).
"""

JOINT_NAMES = ["lift", "swing", "gripper"]

SAMPLE_PERIOD = 0.002
POLICY_FACTOR = 10
MAX_TEACH_DURATION = 30.0

ARM_DEFAULTS = {
    "nominal_inertia": [0.2, 0.1, 0.02],
    "inertia": [0.21, 0.105, 0.021],
    "viscous": [0.3, 0.2, 0.02],
    "coulomb": [0.4, 0.3, 0.05],
    "stribeck_torque": [0.3, 0.2, 0.03],
    "stribeck_velocity": [0.2, 0.2, 0.3],
    "friction_smoothing": 0.05,
    "gravity": [2.0, 0.0, 0.0],
    "lower_limit": [-0.6, -1.2, 2.8],
    "upper_limit": [1.2, 1.2, 4.6],
    "torque_limit": [40.0, 30.0, 10.0],
}

# Surface (joint-space) and tangential friction shared by the table and the board.
CONTACT_DEFAULTS = {
    "stiffness": 400.0,
    "damping": 5.0,
    "friction_coulomb": 0.3,
    "friction_stribeck": 0.2,
    "friction_velocity": 0.2,
    "friction_viscous": 0.05,
    "friction_smoothing": 0.1,
    "object_contact_angle": 3.8,
    "object_damping": 0.5,
    "hold_threshold": 0.5,
}

# Gripper-space stiffness (N·m/rad) of the grasped object per compliance class.
COMPLIANCE_CLASSES = {
    "stiff": 20.0,
    "soft": 5.0,
    "very_stiff": 60.0,
    "very_soft": 2.0,
}

GAIN_DEFAULTS = {
    "kp": [400.0, 400.0, 400.0],
    "kd": [40.0, 40.0, 40.0],
    "kf": [1.0, 1.0, 1.0],
    "cutoff": 100.0,
    "friction_mismatch": 1.0,
}

OPERATOR_DEFAULTS = {
    "stiffness": [10.0, 20.0, 10.0],
    "damping": [2.0, 2.0, 0.6],
    "saturation": 15.0,
    "jitter": 0.05,
}

# Waypoints are (time s, [lift, swing, gripper]) for a 6.6 s stiff-object demo;
# the soft-object demo stretches the same schedule to 7.0 s. The hand hovers
# short of the table (surface 0.6), crosses it slowly, then presses to 0.85 so
# touchdown is gentle next to the held press force.
PICK_WAYPOINTS = [
    (0.0, [0.0, -0.5, 4.3]),
    (0.5, [0.55, -0.5, 4.3]),
    (1.4, [0.64, -0.5, 4.3]),
    (1.7, [0.85, -0.5, 4.3]),
    (2.1, [0.85, -0.5, 3.0]),
    (2.7, [0.1, -0.5, 3.0]),
    (3.8, [0.1, 0.5, 3.0]),
    (4.3, [0.55, 0.5, 3.0]),
    (5.1, [0.64, 0.5, 3.0]),
    (5.4, [0.85, 0.5, 3.0]),
    (6.0, [0.85, 0.5, 4.3]),
    (6.6, [0.0, 0.5, 4.3]),
]

TASK_DEFAULTS = {
    "pick": {
        "kind": "duration",
        "train_variants": ["stiff", "soft"],
        "eval_variants": ["stiff", "soft", "very_stiff", "very_soft"],
        "demo_durations": {"stiff": 6.6, "soft": 7.0},
        "surface": 0.6,
        "start_zone": -0.5,
        "target_zone": 0.5,
        "zone_half_width": 0.15,
        "capture_half_width": 0.12,
        "grasp_height": 0.5,
        "placement_jitter": 0.03,
        "ratios": [0.5, 1.0, 2.0],
        "per_ratio": 10,
        "train_per_condition": 7,
        "labels": [1.5, 3.0, 4.5, 6.0, 9.0, 12.0, 15.0],
        "trials": 5,
        "timeout": 40.0,
        "closed_threshold": 3.7,
        "base_frequency": 1.0,
    },
    "wipe": {
        "kind": "frequency",
        "train_variants": ["high", "low"],
        "eval_variants": ["high", "low"],
        # Board height as the lift angle at first contact (15 cm / 12 cm analogs).
        "surfaces": {"high": 0.45, "low": 0.6},
        "press_depth": 0.1,
        "wipe_amplitude": 0.35,
        "wipe_cycles": 8,
        "eraser_class": "stiff",
        "surface_jitter": 0.005,
        "ratios": [0.5, 1.0, 1.5],
        "per_ratio": 5,
        "train_per_condition": 3,
        "labels": [0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75],
        "trials": 5,
        "timeout": 50.0,
        "closed_threshold": 3.7,
        "base_frequency": 1.0,
    },
}

POLICY_DEFAULTS = {
    "num_lstm_layers": 4,
    "hidden_units": 64,
    "window": 100,
    "batch_size": 128,
}

TRAIN_DEFAULTS = {
    "learning_rate": 1e-4,
    "epochs": 5000,
    "beta1": 0.9,
    "beta2": 0.999,
    "epsilon": 1e-8,
    "clip_norm": 1.0,
    "noise_scale": 0.01,
    "log_every": 50,
}

SEED_NAMES = ["teach", "playback", "noise", "init", "eval"]
