"""Dataset generation: sweep grasp conditions and simulate every episode.

A sweep enumerates object variants x finger pressures x robot offsets, with
four repetitions per condition.  Repetitions differ only in their sensor
noise seed; repetitions 1-3 are the training split and repetition 4 the
validation split.  The smallest convex object is the untrained holdout.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core import ConditionMeta, Episode, ObjectShape
from ..dataset_io import Dataset
from .artifacts import SensorArtifactModel
from .finger import MotionSchedule, simulate_episode

DEFAULT_PRESSURES_KPA = (0.0, 20.0, 40.0, 60.0)
DEFAULT_OFFSETS_Y_MM = (-5.0, 0.0, 5.0)
DEFAULT_OFFSETS_Z_MM = (-3.0, 0.0, 3.0)


@dataclass(frozen=True)
class SweepConfig:
    """Cartesian sweep over grasp conditions."""

    objects: tuple[tuple[ObjectShape, float], ...]
    pressures: tuple[float, ...] = DEFAULT_PRESSURES_KPA
    offsets_y: tuple[float, ...] = DEFAULT_OFFSETS_Y_MM
    offsets_z: tuple[float, ...] = DEFAULT_OFFSETS_Z_MM
    repetitions: int = 4
    friction_mu: float = 0.6
    n_fingers: int = 1
    noise: bool = True
    schedule: MotionSchedule = field(default_factory=MotionSchedule)

    def __post_init__(self):
        if not self.objects or not self.pressures or not self.offsets_y or not self.offsets_z:
            raise ValueError("empty sweep: every axis needs at least one value")
        if self.repetitions < 1:
            raise ValueError("need at least one repetition")

    def conditions(self) -> list[ConditionMeta]:
        """All (condition, repetition) metas in a fixed enumeration order."""
        metas = []
        for shape, size in self.objects:
            for pressure in self.pressures:
                for oy in self.offsets_y:
                    for oz in self.offsets_z:
                        for rep in range(1, self.repetitions + 1):
                            metas.append(
                                ConditionMeta(
                                    object_shape=shape,
                                    object_size=size,
                                    finger_pressure=pressure,
                                    robot_offset_y=oy,
                                    robot_offset_z=oz,
                                    n_fingers=self.n_fingers,
                                    friction_mu=self.friction_mu,
                                    repetition=rep,
                                )
                            )
        return metas

    @property
    def episode_count(self) -> int:
        return (
            len(self.objects)
            * len(self.pressures)
            * len(self.offsets_y)
            * len(self.offsets_z)
            * self.repetitions
        )


def default_sweep(noise: bool = True) -> SweepConfig:
    """Full sweep: 3 convex sizes + concave + square, 720 episodes."""
    return SweepConfig(
        objects=(
            (ObjectShape.CONVEX, 30.0),
            (ObjectShape.CONVEX, 26.0),
            (ObjectShape.CONVEX, 22.0),  # smallest convex: untrained holdout
            (ObjectShape.CONCAVE, 30.0),
            (ObjectShape.SQUARE, 30.0),
        ),
        noise=noise,
    )


def small_sweep(noise: bool = True) -> SweepConfig:
    """Reduced sweep for trend studies and fast tests (48 episodes)."""
    return SweepConfig(
        objects=(
            (ObjectShape.CONVEX, 30.0),
            (ObjectShape.CONCAVE, 30.0),
            (ObjectShape.SQUARE, 30.0),
        ),
        pressures=(20.0, 60.0),
        offsets_y=(-5.0, 5.0),
        offsets_z=(0.0,),
        noise=noise,
    )


def tiny_sweep(noise: bool = True) -> SweepConfig:
    """Minimal sweep with a holdout object (8 episodes), for smoke tests."""
    return SweepConfig(
        objects=((ObjectShape.CONVEX, 30.0), (ObjectShape.CONVEX, 22.0)),
        pressures=(40.0,),
        offsets_y=(0.0,),
        offsets_z=(0.0,),
        noise=noise,
    )


SWEEP_PRESETS = {
    "default": default_sweep,
    "small": small_sweep,
    "tiny": tiny_sweep,
}


def episode_seed(master_seed: int, condition_index: int, repetition: int) -> int:
    """Stable per-episode noise seed; repetitions only differ here."""
    ss = np.random.SeedSequence([master_seed, condition_index, repetition])
    return int(ss.generate_state(1)[0])


def generate_dataset(config: SweepConfig, seed: int) -> Dataset:
    """Simulate the whole sweep deterministically.

    The result is a pure function of (config, seed): per-episode noise seeds
    derive from the master seed and the condition enumeration index.
    """
    metas = config.conditions()
    base_artifacts = SensorArtifactModel() if config.noise else None
    episodes: list[Episode] = []
    for idx, meta in enumerate(metas):
        condition_index = idx // config.repetitions
        artifacts = None
        if base_artifacts is not None:
            artifacts = base_artifacts.with_seed(
                episode_seed(seed, condition_index, meta.repetition)
            )
        episodes.append(
            simulate_episode(meta, artifacts=artifacts, schedule=config.schedule)
        )
    return Dataset(episodes=episodes)
