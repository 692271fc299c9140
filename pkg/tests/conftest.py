"""Shared fixtures: small cached datasets and episodes.

Session scope keeps the simulator from re-running per test; everything
here is deterministic, so caching cannot couple tests to each other.
"""

import pytest

from softtouch.core import ConditionMeta, ObjectShape
from softtouch.simulate.finger import simulate_episode
from softtouch.simulate.sweep import generate_dataset, tiny_sweep


@pytest.fixture(scope="session")
def clean_episode():
    """One noise-free default-condition episode (convex 30 mm, 40 kPa)."""
    meta = ConditionMeta(
        object_shape=ObjectShape.CONVEX,
        object_size=30.0,
        finger_pressure=40.0,
        robot_offset_y=0.0,
        robot_offset_z=0.0,
    )
    return simulate_episode(meta)


@pytest.fixture(scope="session")
def tiny_dataset():
    """Eight noisy episodes: convex 30 (train+val) and convex 22 (holdout)."""
    return generate_dataset(tiny_sweep(noise=True), seed=11)


@pytest.fixture(scope="session")
def tiny_dataset_clean():
    return generate_dataset(tiny_sweep(noise=False), seed=11)
