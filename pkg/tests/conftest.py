import os

import numpy as np
import pytest

from datakit.dataset import NormStats
from datakit.trace import EnvLog, MotionTrace, SideLog, TraceMeta


def pytest_collection_modifyitems(config, items):
    if os.environ.get("WORKBENCH_BENCH") == "1":
        return
    skip = pytest.mark.skip(reason="bench run; set WORKBENCH_BENCH=1")
    for item in items:
        if "bench" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def make_trace():
    """Random-valued trace with every channel varying."""

    def factory(n_ticks=100, n_joints=3, seed=0, dt=0.002, **meta):
        rng = np.random.default_rng(seed)
        sides = [SideLog(*(rng.normal(size=(n_ticks, n_joints)) for _ in range(6))) for _ in range(2)]
        env = EnvLog(rng.uniform(0, 5, n_ticks), rng.uniform(0, 2, n_ticks), rng.normal(size=n_ticks), rng.uniform(size=n_ticks) > 0.5)
        return MotionTrace(sides[0], sides[1], env, TraceMeta(**meta), dt)

    return factory


@pytest.fixture
def identity_norm():
    def factory(n_joints=3, target_mean=None):
        mean = np.zeros(6 * n_joints) if target_mean is None else np.asarray(target_mean, dtype=float)
        return NormStats(np.zeros(3 * n_joints + 1), np.ones(3 * n_joints + 1), mean, np.ones(6 * n_joints))

    return factory
