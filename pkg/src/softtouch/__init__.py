"""Force estimation for a soft pneumatic gripper finger.

The package simulates grasp episodes of a pressure-actuated soft finger
with embedded capacitive sensing, corrupts the sensor channels with the
pathologies of real soft sensors, trains small from-scratch neural
networks to recover the 3-axis fingertip force, and classifies the grasp
contact state (noncontact / stick / slip) from force streams.
"""

from .core import (
    DEFAULT_CONTACT_EPS_N,
    DT,
    SAMPLE_RATE_HZ,
    SENSOR_CHANNEL_NAMES,
    TAXELS_PER_FINGER,
    ConditionMeta,
    Episode,
    ForceVector,
    GraspForces,
    ObjectShape,
    Phase,
    SensorFrame,
    TaxelLayout,
    default_taxel_layout,
    friction_features,
    pressure_normal_force,
    sum_finger_forces,
)

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_CONTACT_EPS_N",
    "DT",
    "SAMPLE_RATE_HZ",
    "SENSOR_CHANNEL_NAMES",
    "TAXELS_PER_FINGER",
    "ConditionMeta",
    "Episode",
    "ForceVector",
    "GraspForces",
    "ObjectShape",
    "Phase",
    "SensorFrame",
    "TaxelLayout",
    "__version__",
    "default_taxel_layout",
    "friction_features",
    "pressure_normal_force",
    "sum_finger_forces",
]
