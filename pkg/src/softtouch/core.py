"""Shared domain types for soft-finger grasp data.

Conventions used throughout the package: forces in newtons, pressures in
kilopascals, lengths in millimeters, time in seconds, all stored as 64-bit
floats.  The robot drags the finger along +x; the grasp squeeze is mostly
+y, so the normal force lives in the y-z plane and the tangential
(friction) force along x.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum, IntEnum

import numpy as np

SAMPLE_RATE_HZ = 100.0
DT = 0.01  # sample spacing, seconds
TAXELS_PER_FINGER = 12
MAX_INPUT_PRESSURE_KPA = 60.0

# Below this normal force the friction ratio F_f/F_n is meaningless.
DEFAULT_CONTACT_EPS_N = 0.05


class ObjectShape(str, Enum):
    CONVEX = "convex"
    CONCAVE = "concave"
    SQUARE = "square"


class Phase(IntEnum):
    """Episode phase: before contact, settling, robot moving, released."""

    PRE_CONTACT = 0
    CONTACT_SETTLE = 1
    MOVING = 2
    RELEASED = 3

    @property
    def label(self) -> str:
        return _PHASE_LABELS[self]

    @staticmethod
    def from_label(label: str) -> "Phase":
        try:
            return _PHASE_FROM_LABEL[label]
        except KeyError:
            raise ValueError(f"unknown phase label: {label!r}") from None


_PHASE_LABELS = {
    Phase.PRE_CONTACT: "PreContact",
    Phase.CONTACT_SETTLE: "ContactSettle",
    Phase.MOVING: "Moving",
    Phase.RELEASED: "Released",
}
_PHASE_FROM_LABEL = {v: k for k, v in _PHASE_LABELS.items()}


@dataclass(frozen=True)
class ForceVector:
    """3-axis finger force in newtons: fx tangential, fy/fz normal plane."""

    fx: float
    fy: float
    fz: float

    def __post_init__(self):
        if not (math.isfinite(self.fx) and math.isfinite(self.fy) and math.isfinite(self.fz)):
            raise ValueError(f"force components must be finite, got {self!r}")

    def norm(self) -> float:
        return math.sqrt(self.fx * self.fx + self.fy * self.fy + self.fz * self.fz)

    def as_array(self) -> np.ndarray:
        return np.array([self.fx, self.fy, self.fz], dtype=np.float64)

    @staticmethod
    def from_array(a) -> "ForceVector":
        return ForceVector(float(a[0]), float(a[1]), float(a[2]))


def friction_features(
    f: ForceVector, contact_eps: float = DEFAULT_CONTACT_EPS_N
) -> tuple[float, float, float | None]:
    """Split a force into (normal magnitude, friction magnitude, ratio).

    The normal force is sqrt(fy^2 + fz^2), the friction force |fx|.  The
    ratio f_f / f_n is returned as None when f_n <= contact_eps, where it
    would be dominated by noise.
    """
    f_n = math.hypot(f.fy, f.fz)
    f_f = abs(f.fx)
    ratio = f_f / f_n if f_n > contact_eps else None
    return f_n, f_f, ratio


def sum_finger_forces(per_finger: list[ForceVector]) -> ForceVector:
    """Component-wise sum of per-finger forces acting on the object."""
    if not per_finger:
        raise ValueError("no fingers: cannot sum an empty force list")
    fx = math.fsum(f.fx for f in per_finger)
    fy = math.fsum(f.fy for f in per_finger)
    fz = math.fsum(f.fz for f in per_finger)
    return ForceVector(fx, fy, fz)


@dataclass(frozen=True)
class GraspForces:
    """Per-finger total forces plus their sum, the external force on the object."""

    per_finger: tuple[ForceVector, ...]
    external: ForceVector

    SUM_TOL = 1e-9  # newtons

    def __post_init__(self):
        object.__setattr__(self, "per_finger", tuple(self.per_finger))
        expected = sum_finger_forces(list(self.per_finger))
        err = max(
            abs(expected.fx - self.external.fx),
            abs(expected.fy - self.external.fy),
            abs(expected.fz - self.external.fz),
        )
        if err > self.SUM_TOL:
            raise ValueError(
                f"external force differs from per-finger sum by {err:.3e} N"
            )

    @staticmethod
    def from_fingers(per_finger: list[ForceVector]) -> "GraspForces":
        return GraspForces(tuple(per_finger), sum_finger_forces(per_finger))


@dataclass(frozen=True)
class TaxelLayout:
    """Positions (mm along the finger surface) and unit contact normals of the taxels."""

    count: int
    normals: np.ndarray  # (count, 3) unit vectors
    positions: np.ndarray  # (count, 3) mm

    UNIT_TOL = 1e-9

    def __post_init__(self):
        normals = np.asarray(self.normals, dtype=np.float64)
        positions = np.asarray(self.positions, dtype=np.float64)
        object.__setattr__(self, "normals", normals)
        object.__setattr__(self, "positions", positions)
        if normals.shape != (self.count, 3) or positions.shape != (self.count, 3):
            raise ValueError(
                f"layout arrays must be ({self.count}, 3), got normals "
                f"{normals.shape} and positions {positions.shape}"
            )
        norms = np.linalg.norm(normals, axis=1)
        if np.any(np.abs(norms - 1.0) > self.UNIT_TOL):
            raise ValueError("taxel normals must be unit vectors")

    @property
    def arc_positions(self) -> np.ndarray:
        """Scalar coordinate of each taxel along the finger surface (mm)."""
        return self.positions[:, 0]


def default_taxel_layout(
    count: int = TAXELS_PER_FINGER,
    pitch_mm: float = 5.0,
    tilt_max_deg: float = 35.0,
    mirror_y: bool = False,
) -> TaxelLayout:
    """Taxel row along the finger with normals fanning in the y-z plane.

    The taxels sit on a line along x (spacing ``pitch_mm``, centered on 0).
    Normals point into the object: mostly +y at the middle of the finger,
    tilting progressively toward +/-z at the ends, which is what gives the
    grasp its z force component when the contact patch sits off-center.
    ``mirror_y`` flips the squeeze direction for the opposing finger of a
    two-finger grasp.
    """
    idx = np.arange(count, dtype=np.float64)
    arc = (idx - (count - 1) / 2.0) * pitch_mm
    half_span = abs(arc[0]) if count > 1 else 1.0
    tilt = np.deg2rad(tilt_max_deg) * arc / half_span
    y_sign = -1.0 if mirror_y else 1.0
    normals = np.stack(
        [np.zeros(count), y_sign * np.cos(tilt), np.sin(tilt)], axis=1
    )
    positions = np.stack([arc, np.zeros(count), np.zeros(count)], axis=1)
    return TaxelLayout(count=count, normals=normals, positions=positions)


def pressure_normal_force(taxel_forces, layout: TaxelLayout) -> ForceVector:
    """Sum per-taxel normal forces into the finger's normal force vector."""
    forces = np.asarray(taxel_forces, dtype=np.float64)
    if forces.shape != (layout.count,):
        raise ValueError(
            f"expected {layout.count} taxel forces, got shape {forces.shape}"
        )
    if np.any(forces < 0):
        j = int(np.argmin(forces))
        raise ValueError(f"tension at taxel {j}: force {forces[j]:.6g} N < 0")
    total = forces @ layout.normals
    return ForceVector.from_array(total)


@dataclass(frozen=True)
class SensorFrame:
    """One 100 Hz sample of the finger's sensor suite."""

    t: float  # seconds
    input_pressure: float  # commanded pneumatic pressure, kPa
    strain: float  # normalized capacitance, dimensionless
    taxels: tuple[float, ...]  # 12 normalized capacitance values


@dataclass(frozen=True)
class PhaseMark:
    phase: Phase
    is_slipping: bool

    def __post_init__(self):
        if self.phase == Phase.PRE_CONTACT and self.is_slipping:
            raise ValueError("pre-contact frames cannot slip")


@dataclass(frozen=True)
class ConditionMeta:
    """Grasp condition: object, offsets, pressure, and repetition index."""

    object_shape: ObjectShape
    object_size: float  # mm, radius or half-width
    finger_pressure: float  # kPa
    robot_offset_y: float  # mm
    robot_offset_z: float  # mm
    n_fingers: int = 1
    friction_mu: float = 0.6
    repetition: int = 1

    def __post_init__(self):
        if self.repetition not in (1, 2, 3, 4):
            raise ValueError(f"repetition must be 1..4, got {self.repetition}")
        if self.friction_mu <= 0:
            raise ValueError("friction_mu must be > 0")
        if self.n_fingers not in (1, 2):
            raise ValueError(f"n_fingers must be 1 or 2, got {self.n_fingers}")

    @property
    def is_train_repetition(self) -> bool:
        """Repetitions 1-3 train the model; repetition 4 is validation."""
        return self.repetition <= 3

    def to_dict(self) -> dict:
        return {
            "object_shape": self.object_shape.value,
            "object_size": self.object_size,
            "finger_pressure": self.finger_pressure,
            "robot_offset_y": self.robot_offset_y,
            "robot_offset_z": self.robot_offset_z,
            "n_fingers": self.n_fingers,
            "friction_mu": self.friction_mu,
            "repetition": self.repetition,
        }

    @staticmethod
    def from_dict(d: dict) -> "ConditionMeta":
        return ConditionMeta(
            object_shape=ObjectShape(d["object_shape"]),
            object_size=float(d["object_size"]),
            finger_pressure=float(d["finger_pressure"]),
            robot_offset_y=float(d["robot_offset_y"]),
            robot_offset_z=float(d["robot_offset_z"]),
            n_fingers=int(d["n_fingers"]),
            friction_mu=float(d["friction_mu"]),
            repetition=int(d["repetition"]),
        )


@dataclass
class Episode:
    """One time-aligned recording: sensors, force labels and phase flags.

    Data is held as numpy arrays for the numeric pipeline; ``frames()``,
    ``labels()`` and ``phase_marks()`` materialize the per-frame value
    objects when object-level access is wanted.
    """

    meta: ConditionMeta
    t: np.ndarray  # (n,) seconds
    input_pressure: np.ndarray  # (n,) kPa
    strain: np.ndarray  # (n,)
    taxels: np.ndarray  # (n, 12)
    forces: np.ndarray  # (n, 3) newtons, per-finger ground truth
    phases: np.ndarray  # (n,) Phase values as int
    slipping: np.ndarray  # (n,) bool
    holdout: bool = False  # object excluded from training
    log: list[str] = field(default_factory=list)

    TIME_TOL = 1e-9

    def __len__(self) -> int:
        return len(self.t)

    def validate(self) -> None:
        n = len(self.t)
        for name in ("input_pressure", "strain", "phases", "slipping"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"episode field {name} has length mismatch")
        if self.taxels.shape != (n, TAXELS_PER_FINGER):
            raise ValueError(f"taxels must be (n, {TAXELS_PER_FINGER})")
        if self.forces.shape != (n, 3):
            raise ValueError("forces must be (n, 3)")
        if n >= 2:
            dt = np.diff(self.t)
            if np.any(np.abs(dt - DT) > self.TIME_TOL):
                raise ValueError("timestamps must be uniform at 0.01 s")
        pre = self.phases == Phase.PRE_CONTACT
        if np.any(self.slipping[pre]):
            raise ValueError("pre-contact frames cannot slip")

    def frames(self) -> list[SensorFrame]:
        return [
            SensorFrame(
                t=float(self.t[i]),
                input_pressure=float(self.input_pressure[i]),
                strain=float(self.strain[i]),
                taxels=tuple(float(v) for v in self.taxels[i]),
            )
            for i in range(len(self))
        ]

    def labels(self) -> list[ForceVector]:
        return [ForceVector.from_array(row) for row in self.forces]

    def phase_marks(self) -> list[PhaseMark]:
        return [
            PhaseMark(Phase(int(p)), bool(s))
            for p, s in zip(self.phases, self.slipping)
        ]

    def sensor_matrix(self) -> np.ndarray:
        """All sensor channels as (n, 14): input_pressure, strain, 12 taxels."""
        return np.column_stack([self.input_pressure, self.strain, self.taxels])


SENSOR_CHANNEL_NAMES = (
    "input_pressure",
    "strain",
    *[f"taxel_{j:02d}" for j in range(TAXELS_PER_FINGER)],
)
