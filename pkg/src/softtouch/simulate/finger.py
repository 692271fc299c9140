"""Ground-truth grasp simulation for a single soft finger.

The protocol mirrors the friction experiments this package models: the
finger pressurizes, makes contact, settles for two seconds, then the robot
drags it tangentially at 2 mm/s over 30 mm.  While the contact sticks the
tangential force ramps linearly with the robot motion; once it reaches the
Coulomb limit mu * F_n the contact slips and the force rides the limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ..core import (
    DT,
    ConditionMeta,
    Episode,
    ObjectShape,
    Phase,
    TaxelLayout,
    default_taxel_layout,
)
from .artifacts import SensorArtifactModel, corrupt_channels

REFERENCE_OBJECT_SIZE = 30.0  # mm, the size all stiffness factors are relative to

_SHAPE_STIFFNESS = {
    # Contact-geometry multiplier on grasp stiffness: a concave object wraps
    # the finger (larger patch), a flat square face loads it hardest.
    ObjectShape.CONVEX: 1.0,
    ObjectShape.CONCAVE: 1.13,
    ObjectShape.SQUARE: 1.29,
}


@dataclass(frozen=True)
class FingerCalibration:
    """Base constants mapping a grasp condition onto finger parameters."""

    k_normal_base: float = 0.85  # N/mm at 0 kPa on the reference object
    pressure_stiffen: float = 0.01  # fractional stiffness gain per kPa
    k_tangent_base: float = 0.52  # N/mm
    tangent_size_gain: float = 0.009  # per mm of object size
    tangent_offset_y_gain: float = 0.012  # per mm of |offset_y|
    tangent_offset_z_gain: float = 0.009  # per mm of |offset_z|
    rest_indent_base: float = 1.9  # mm
    indent_pressure_gain: float = 0.011  # per kPa
    indent_size_gain: float = 0.008  # per mm of object size
    indent_offset_y_loss: float = 0.004  # per mm of |offset_y|
    indent_offset_z_loss: float = 0.012  # per mm of |offset_z|
    size_exponent: float = 0.8
    # Strain channel: affine response to pressure, indentation, tangential bend.
    strain_offset: float = 0.08
    strain_pressure_gain: float = 0.0035  # per kPa
    strain_indent_gain: float = 0.16  # per mm
    strain_tangent_gain: float = 0.11  # per mm

    def size_factor(self, meta: ConditionMeta) -> float:
        rel = meta.object_size / REFERENCE_OBJECT_SIZE
        return _SHAPE_STIFFNESS[meta.object_shape] * rel**self.size_exponent


@dataclass(frozen=True)
class FingerModel:
    """Resolved per-condition finger parameters."""

    k_normal: float  # N/mm, grasp-direction stiffness
    k_tangent: float  # N/mm, friction-force ramp stiffness while stuck
    rest_indentation: float  # mm, settled indentation depth
    mu: float  # Coulomb friction coefficient

    def __post_init__(self):
        if self.k_normal <= 0 or self.k_tangent <= 0 or self.mu <= 0:
            raise ValueError("stiffnesses and mu must be positive")

    @staticmethod
    def for_condition(
        meta: ConditionMeta, calib: FingerCalibration | None = None
    ) -> "FingerModel":
        calib = calib or FingerCalibration()
        k_normal = (
            calib.k_normal_base
            * (1.0 + calib.pressure_stiffen * meta.finger_pressure)
            * calib.size_factor(meta)
        )
        # Tangential stiffness varies with position and object size but is
        # independent of finger pressure and surface friction.
        k_tangent = calib.k_tangent_base * (
            1.0 + calib.tangent_size_gain * (meta.object_size - REFERENCE_OBJECT_SIZE)
        )
        k_tangent *= (
            1.0
            - calib.tangent_offset_y_gain * abs(meta.robot_offset_y)
            - calib.tangent_offset_z_gain * abs(meta.robot_offset_z)
        )
        indent = (
            calib.rest_indent_base
            * (1.0 + calib.indent_pressure_gain * meta.finger_pressure)
            * (1.0 + calib.indent_size_gain * (meta.object_size - REFERENCE_OBJECT_SIZE))
            * (1.0 - calib.indent_offset_y_loss * abs(meta.robot_offset_y))
            * (1.0 - calib.indent_offset_z_loss * abs(meta.robot_offset_z))
        )
        if meta.n_fingers == 2:
            indent *= 0.5  # squeeze shared between opposing fingers
        return FingerModel(
            k_normal=k_normal,
            k_tangent=k_tangent,
            rest_indentation=indent,
            mu=meta.friction_mu,
        )


@dataclass(frozen=True)
class MotionSchedule:
    """Timing of one grasp-and-drag episode; defaults follow the protocol."""

    contact_time: float = 1.0  # s, T_c: pressurization reaches the object
    settle_duration: float = 2.0  # s, contact settle before the robot moves
    move_speed: float = 2.0  # mm/s tangential robot speed
    move_distance: float = 30.0  # mm total tangential travel
    pressurize_time: float = 0.8  # s, commanded-pressure ramp
    release_ramp_normal: float = 0.3  # s, normal force decay on release
    release_ramp_tangent: float = 0.2  # s, tangential relaxes faster
    release_hold: float = 0.7  # s of zero-force tail after release

    def __post_init__(self):
        if self.contact_time < 0 or self.move_speed <= 0:
            raise ValueError("contact_time must be >= 0 and move_speed > 0")
        if self.settle_duration <= 0 and self.move_duration <= 0:
            raise ValueError("no contact phase: settle and move durations are zero")
        if self.release_ramp_tangent > self.release_ramp_normal:
            raise ValueError("tangential release must not outlast normal release")

    @property
    def move_duration(self) -> float:
        return self.move_distance / self.move_speed

    @property
    def move_start(self) -> float:
        """T_m: robot starts moving settle_duration after contact."""
        return self.contact_time + self.settle_duration

    @property
    def release_start(self) -> float:
        return self.move_start + self.move_duration

    @property
    def total_duration(self) -> float:
        return self.release_start + self.release_ramp_normal + self.release_hold

    def frame_counts(self) -> tuple[int, int, int, int]:
        """Frames in each phase (pre-contact, settle, moving, released)."""
        i_contact = round(self.contact_time / DT)
        i_move = round(self.move_start / DT)
        i_release = round(self.release_start / DT)
        n = round(self.total_duration / DT)
        return i_contact, i_move - i_contact, i_release - i_move, n - i_release


@dataclass
class ForceTrajectory:
    """Per-frame ground truth before sensor projection."""

    t: np.ndarray
    input_pressure: np.ndarray  # commanded, kPa
    indentation: np.ndarray  # mm
    normal_force: np.ndarray  # N, scalar magnitude
    tangent_force: np.ndarray  # N, along +x
    tangent_deflection: np.ndarray  # mm
    phases: np.ndarray
    slipping: np.ndarray


def _smoothstep(u: np.ndarray) -> np.ndarray:
    u = np.clip(u, 0.0, 1.0)
    return u * u * (3.0 - 2.0 * u)


def simulate_forces(
    meta: ConditionMeta,
    finger: FingerModel | None = None,
    schedule: MotionSchedule | None = None,
    extra_normal: np.ndarray | None = None,
) -> ForceTrajectory:
    """Run the stick-slip grasp protocol and return ground-truth traces.

    ``extra_normal`` optionally adds an external per-frame normal load (N),
    used by the insertion scenarios; it feeds the Coulomb limit, so slip
    flags stay consistent with the disturbed force.  It must be zero while
    the finger is out of contact.
    """
    finger = finger or FingerModel.for_condition(meta)
    schedule = schedule or MotionSchedule()
    n_pre, n_settle, n_move, n_release = schedule.frame_counts()
    n = n_pre + n_settle + n_move + n_release
    i_contact = n_pre
    i_move = n_pre + n_settle
    i_release = i_move + n_move

    t = np.arange(n, dtype=np.float64) * DT
    phases = np.full(n, Phase.RELEASED, dtype=np.int64)
    phases[:i_contact] = Phase.PRE_CONTACT
    phases[i_contact:i_move] = Phase.CONTACT_SETTLE
    phases[i_move:i_release] = Phase.MOVING

    # Commanded pressure: ramp up, hold, ramp back down on release.
    pressure = np.full(n, meta.finger_pressure, dtype=np.float64)
    if schedule.pressurize_time > 0:
        ramp = _smoothstep(t / schedule.pressurize_time)
        pressure = meta.finger_pressure * ramp
    if n_release > 0:
        tau = t[i_release:] - t[i_release] + DT
        pressure[i_release:] = meta.finger_pressure * np.maximum(
            0.0, 1.0 - tau / schedule.release_ramp_normal
        )

    indentation = np.zeros(n, dtype=np.float64)
    if n_settle > 0:
        u = (np.arange(n_settle) + 1) / n_settle
        indentation[i_contact:i_move] = finger.rest_indentation * _smoothstep(u)
    indentation[i_move:i_release] = finger.rest_indentation

    normal = finger.k_normal * indentation
    if extra_normal is not None:
        extra_normal = np.asarray(extra_normal, dtype=np.float64)
        if extra_normal.shape != (n,):
            raise ValueError(f"extra_normal must have shape ({n},)")
        if np.any(extra_normal[indentation == 0.0] != 0.0):
            raise ValueError("extra_normal must be zero while out of contact")
        if np.any(normal + extra_normal < 0.0):
            raise ValueError("extra_normal would make the normal force negative")
        normal = normal + extra_normal
        indentation = normal / finger.k_normal
    tangent = np.zeros(n, dtype=np.float64)
    deflection = np.zeros(n, dtype=np.float64)
    slipping = np.zeros(n, dtype=bool)

    # Stick-slip integration over the moving phase.  The robot position is
    # computed from the frame index (not accumulated) so the slip onset
    # lands on the analytically expected frame.
    step = schedule.move_speed * DT
    slipped = 0.0  # mm of accumulated sliding at the contact
    for k in range(n_move):
        i = i_move + k
        u_robot = step * k
        candidate = u_robot - slipped
        limit = finger.mu * normal[i] / finger.k_tangent
        if candidate >= limit:
            deflection[i] = limit
            slipped = u_robot - limit
            slipping[i] = True
        else:
            deflection[i] = candidate
    tangent[i_move:i_release] = finger.k_tangent * deflection[i_move:i_release]

    # Release: the finger detaches; tangential load relaxes faster than the
    # normal load so the force ratio drops strictly below mu immediately.
    if n_release > 0:
        tau = t[i_release:] - t[i_release] + DT
        fac_n = np.maximum(0.0, 1.0 - tau / schedule.release_ramp_normal)
        fac_t = np.maximum(0.0, 1.0 - tau / schedule.release_ramp_tangent) ** 2
        normal[i_release:] = normal[i_release - 1] * fac_n if i_release > 0 else 0.0
        indentation[i_release:] = (
            indentation[i_release - 1] * fac_n if i_release > 0 else 0.0
        )
        f_hold = tangent[i_release - 1] if i_release > 0 else 0.0
        tangent[i_release:] = f_hold * fac_t
        deflection[i_release:] = tangent[i_release:] / finger.k_tangent

    return ForceTrajectory(
        t=t,
        input_pressure=pressure,
        indentation=indentation,
        normal_force=normal,
        tangent_force=tangent,
        tangent_deflection=deflection,
        phases=phases,
        slipping=slipping,
    )


@dataclass(frozen=True)
class ContactPatch:
    """Static distribution of the normal force over the taxel row."""

    weights: np.ndarray  # (count,) taxel share of a unit normal force
    direction: np.ndarray  # (3,) unit vector of the summed normal force
    center: float  # mm along the finger, after clamping
    clamped: bool

    PATCH_RADIUS = 11.0  # mm, cosine-squared support half-width


def patch_for_center(center: float, layout: TaxelLayout) -> ContactPatch:
    """Cosine-squared pressure bump at an arbitrary point along the finger."""
    arc = layout.arc_positions
    clamped = False
    if center < arc.min() or center > arc.max():
        center = float(np.clip(center, arc.min(), arc.max()))
        clamped = True
    d = np.abs(arc - center)
    raw = np.where(
        d < ContactPatch.PATCH_RADIUS,
        np.cos(0.5 * np.pi * d / ContactPatch.PATCH_RADIUS) ** 2,
        0.0,
    )
    summed = raw @ layout.normals
    scale = float(np.linalg.norm(summed))
    return ContactPatch(
        weights=raw / scale,
        direction=summed / scale,
        center=center,
        clamped=clamped,
    )


def contact_patch(
    meta: ConditionMeta, layout: TaxelLayout, offset_z_coupling: float = 0.6
) -> ContactPatch:
    """Patch centered where the robot offsets put the contact point."""
    center = meta.robot_offset_y + offset_z_coupling * meta.robot_offset_z
    return patch_for_center(center, layout)


def clean_sensor_projection(
    trajectory: ForceTrajectory,
    meta: ConditionMeta,
    layout: TaxelLayout,
    calib: FingerCalibration | None = None,
) -> tuple[np.ndarray, np.ndarray, ContactPatch]:
    """Distribute F_n over taxels and synthesize the strain channel.

    Returns (strain (n,), taxel_forces (n, count), patch).  The taxel forces
    are scaled so that summing them against the layout normals reproduces
    the simulated normal force vector exactly.
    """
    calib = calib or FingerCalibration()
    if np.any(trajectory.normal_force < 0):
        raise ValueError("normal force must be nonnegative")
    patch = contact_patch(meta, layout)
    taxel_forces = np.outer(trajectory.normal_force, patch.weights)
    strain = (
        calib.strain_offset
        + calib.strain_pressure_gain * trajectory.input_pressure
        + calib.strain_indent_gain * trajectory.indentation
        + calib.strain_tangent_gain * np.abs(trajectory.tangent_deflection)
    )
    return strain, taxel_forces, patch


def label_forces(trajectory: ForceTrajectory, patch: ContactPatch) -> np.ndarray:
    """(n, 3) per-finger force labels: tangential x plus the normal vector."""
    forces = np.outer(trajectory.normal_force, patch.direction)
    forces[:, 0] += trajectory.tangent_force
    return forces


def simulate_episode(
    meta: ConditionMeta,
    finger: FingerModel | None = None,
    artifacts: SensorArtifactModel | None = None,
    schedule: MotionSchedule | None = None,
    layout: TaxelLayout | None = None,
    calib: FingerCalibration | None = None,
) -> Episode:
    """Simulate one grasp episode and corrupt its sensor channels.

    With ``artifacts=None`` the sensors are ideal (identity corruption),
    which keeps bare calls deterministic.
    """
    layout = layout or default_taxel_layout(mirror_y=False)
    trajectory = simulate_forces(meta, finger=finger, schedule=schedule)
    strain, taxel_forces, patch = clean_sensor_projection(
        trajectory, meta, layout, calib=calib
    )
    forces = label_forces(trajectory, patch)
    artifacts = artifacts or SensorArtifactModel.identity()
    strain_out, taxels_out = corrupt_channels(
        strain, taxel_forces, artifacts, trajectory.t
    )
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
    if patch.clamped:
        episode.log.append(
            f"contact center clamped to taxel span at {patch.center:g} mm"
        )
    episode.validate()
    return episode


def simulate_grasp(
    meta: ConditionMeta,
    artifacts: SensorArtifactModel | None = None,
    schedule: MotionSchedule | None = None,
    calib: FingerCalibration | None = None,
) -> list[Episode]:
    """Simulate all fingers of a grasp; two-finger grasps mirror the finger.

    Each finger is an independent single-finger simulation with the shared
    robot motion; per-finger indentation halves so the squeeze is shared.
    The opposing finger's normals flip in y, so normal components largely
    cancel in the external sum while tangential friction adds up.
    """
    episodes = []
    for finger_idx in range(meta.n_fingers):
        layout = default_taxel_layout(mirror_y=finger_idx == 1)
        finger_artifacts = artifacts
        if artifacts is not None and meta.n_fingers == 2:
            finger_artifacts = replace(artifacts, seed=artifacts.seed + finger_idx)
        episodes.append(
            simulate_episode(
                meta,
                artifacts=finger_artifacts,
                schedule=schedule,
                layout=layout,
                calib=calib,
            )
        )
    return episodes


def external_forces(episodes: list[Episode]) -> np.ndarray:
    """(n, 3) sum of per-finger forces: the external force on the object."""
    if not episodes:
        raise ValueError("no fingers: cannot sum an empty episode list")
    total = np.zeros_like(episodes[0].forces)
    for ep in episodes:
        total += ep.forces
    return total


def slip_onset_frame(episode_or_trajectory) -> int | None:
    """Index of the first slipping frame, or None if the episode never slips."""
    slipping = episode_or_trajectory.slipping
    idx = np.flatnonzero(slipping)
    return int(idx[0]) if idx.size else None


def never_slips(meta: ConditionMeta, schedule: MotionSchedule) -> bool:
    """True when the tangential travel cannot reach the Coulomb limit."""
    finger = FingerModel.for_condition(meta)
    limit = finger.mu * finger.k_normal * finger.rest_indentation / finger.k_tangent
    return schedule.move_distance < limit


def two_finger_apparent_mu(episodes: list[Episode]) -> float:
    """Peak F_f/F_n of the external force during moving frames.

    With opposing fingers the normal components cancel while friction adds,
    inflating the apparent friction coefficient well above the material mu.
    """
    total = external_forces(episodes)
    moving = episodes[0].phases == Phase.MOVING
    f_n = np.hypot(total[moving, 1], total[moving, 2])
    f_f = np.abs(total[moving, 0])
    valid = f_n > 1e-9
    if not np.any(valid):
        raise ValueError("no frames with measurable external normal force")
    return float(np.max(f_f[valid] / f_n[valid]))
