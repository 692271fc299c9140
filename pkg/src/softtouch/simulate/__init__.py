"""Grasp simulator: finger physics, sensor corruption, sweeps, scenarios."""

from .artifacts import (
    SensorArtifactModel,
    corrupt_channels,
    default_crosstalk_matrix,
    play_operator,
)
from .finger import (
    ContactPatch,
    FingerCalibration,
    FingerModel,
    ForceTrajectory,
    MotionSchedule,
    clean_sensor_projection,
    contact_patch,
    external_forces,
    label_forces,
    never_slips,
    patch_for_center,
    simulate_episode,
    simulate_forces,
    simulate_grasp,
    slip_onset_frame,
    two_finger_apparent_mu,
)
from .scenarios import (
    Scenario,
    ScenarioEpisode,
    insertion_disturbance,
    plug_schedule,
    scenario_condition,
    simulate_scenario,
)
from .sweep import (
    SWEEP_PRESETS,
    SweepConfig,
    default_sweep,
    episode_seed,
    generate_dataset,
    small_sweep,
    tiny_sweep,
)

__all__ = [
    "ContactPatch",
    "FingerCalibration",
    "FingerModel",
    "ForceTrajectory",
    "MotionSchedule",
    "SWEEP_PRESETS",
    "Scenario",
    "ScenarioEpisode",
    "SensorArtifactModel",
    "SweepConfig",
    "clean_sensor_projection",
    "contact_patch",
    "corrupt_channels",
    "default_crosstalk_matrix",
    "default_sweep",
    "episode_seed",
    "external_forces",
    "generate_dataset",
    "insertion_disturbance",
    "label_forces",
    "never_slips",
    "patch_for_center",
    "play_operator",
    "plug_schedule",
    "scenario_condition",
    "simulate_episode",
    "simulate_forces",
    "simulate_grasp",
    "simulate_scenario",
    "slip_onset_frame",
    "small_sweep",
    "tiny_sweep",
    "two_finger_apparent_mu",
]
