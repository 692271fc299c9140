"""Replay scenarios: a slip test and three plug-insertion outcomes.

The plug scenarios grasp an object, then spend the moving phase inserting
it.  The socket reaction feeds back into the finger as extra normal load:
a successful insertion adds only a small bump, over-pushing ramps up a
large opposing force, and a misaligned insertion combines a moderate bump
with the contact patch sliding along the finger (an asymmetric profile).
The slip test is simply the standard grasp-and-drag protocol.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from ..core import ConditionMeta, Episode, ObjectShape, default_taxel_layout
from .artifacts import SensorArtifactModel, corrupt_channels
from .finger import (
    FingerCalibration,
    FingerModel,
    MotionSchedule,
    contact_patch,
    patch_for_center,
    simulate_episode,
    simulate_forces,
    slip_onset_frame,
)


class Scenario(str, Enum):
    SLIP_TEST = "slip_test"
    PLUG_SUCCESS = "plug_success"
    PLUG_OVERPUSH = "plug_overpush"
    PLUG_MISALIGN = "plug_misalign"


# Peak of the injected insertion reaction, newtons.
SUCCESS_PEAK_N = 0.3
OVERPUSH_PEAK_N = 5.0
MISALIGN_PEAK_N = 3.0
MISALIGN_DRIFT_MM = 12.0  # contact-center travel during a misaligned insertion


def plug_schedule() -> MotionSchedule:
    """Insertion takes 4 s of robot travel instead of the full 15 s drag."""
    return MotionSchedule(move_distance=8.0)


def scenario_condition() -> ConditionMeta:
    """Nominal grasp for scenario replays: centered convex object, 40 kPa."""
    return ConditionMeta(
        object_shape=ObjectShape.CONVEX,
        object_size=30.0,
        finger_pressure=40.0,
        robot_offset_y=0.0,
        robot_offset_z=0.0,
    )


@dataclass
class ScenarioEpisode:
    """A simulated scenario plus the ground truth a replay is scored against."""

    scenario: Scenario
    episode: Episode
    insertion: tuple[int, int] | None  # [start, end) frames of the insertion
    disturbance: np.ndarray  # (n,) injected normal load, N
    truth_slip_frame: int | None


def insertion_disturbance(scenario: Scenario, n_move: int) -> tuple[np.ndarray, float]:
    """Per-frame reaction profile over the insertion window and center drift."""
    tau = (np.arange(n_move) + 1.0) / n_move
    bump = np.sin(np.pi * tau) ** 2
    if scenario == Scenario.PLUG_SUCCESS:
        return SUCCESS_PEAK_N * bump, 0.0
    if scenario == Scenario.PLUG_OVERPUSH:
        return OVERPUSH_PEAK_N * tau**2, 0.0
    if scenario == Scenario.PLUG_MISALIGN:
        return MISALIGN_PEAK_N * bump, MISALIGN_DRIFT_MM
    raise ValueError(f"not a plug scenario: {scenario}")


def simulate_scenario(
    scenario: Scenario,
    seed: int = 0,
    noise: bool = True,
    meta: ConditionMeta | None = None,
    calib: FingerCalibration | None = None,
) -> ScenarioEpisode:
    """Build one scenario episode, deterministic given (scenario, seed)."""
    scenario = Scenario(scenario)
    meta = meta or scenario_condition()
    artifacts = SensorArtifactModel() if noise else SensorArtifactModel.identity()
    artifacts = artifacts.with_seed(seed)

    if scenario == Scenario.SLIP_TEST:
        episode = simulate_episode(meta, artifacts=artifacts, calib=calib)
        return ScenarioEpisode(
            scenario=scenario,
            episode=episode,
            insertion=None,
            disturbance=np.zeros(len(episode)),
            truth_slip_frame=slip_onset_frame(episode),
        )

    calib = calib or FingerCalibration()
    schedule = plug_schedule()
    finger = FingerModel.for_condition(meta, calib)
    n_pre, n_settle, n_move, n_release = schedule.frame_counts()
    n = n_pre + n_settle + n_move + n_release
    i_move = n_pre + n_settle
    i_release = i_move + n_move

    profile, drift = insertion_disturbance(scenario, n_move)
    extra = np.zeros(n)
    extra[i_move:i_release] = profile
    trajectory = simulate_forces(
        meta, finger=finger, schedule=schedule, extra_normal=extra
    )

    layout = default_taxel_layout(mirror_y=False)
    base = contact_patch(meta, layout)
    centers = np.full(n, base.center)
    if drift != 0.0:
        tau = (np.arange(n_move) + 1.0) / n_move
        centers[i_move:i_release] = base.center + drift * tau
        centers[i_release:] = centers[i_release - 1]  # stays shifted on release

    taxels = np.zeros((n, layout.count))
    forces = np.zeros((n, 3))
    patches = {}  # centers repeat heavily outside the drift window
    for i in range(n):
        patch = patches.get(centers[i])
        if patch is None:
            patch = patch_for_center(centers[i], layout)
            patches[centers[i]] = patch
        taxels[i] = trajectory.normal_force[i] * patch.weights
        forces[i] = trajectory.normal_force[i] * patch.direction
    forces[:, 0] += trajectory.tangent_force

    strain = (
        calib.strain_offset
        + calib.strain_pressure_gain * trajectory.input_pressure
        + calib.strain_indent_gain * trajectory.indentation
        + calib.strain_tangent_gain * np.abs(trajectory.tangent_deflection)
    )
    strain_out, taxels_out = corrupt_channels(strain, taxels, artifacts, trajectory.t)

    episode = Episode(
        meta=meta,
        t=trajectory.t,
        input_pressure=trajectory.input_pressure,
        strain=strain_out,
        taxels=taxels_out,
        forces=forces,
        phases=trajectory.phases,
        slipping=trajectory.slipping,
    )
    episode.validate()
    return ScenarioEpisode(
        scenario=scenario,
        episode=episode,
        insertion=(i_move, i_release),
        disturbance=extra,
        truth_slip_frame=slip_onset_frame(trajectory),
    )
