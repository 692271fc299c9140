"""Feature assembly, robust scaling, and sequence windowing.

Models consume one of seven feature sets (t1-t7), subsets of the 14
sensor channels in the fixed order [input_pressure, strain, taxel_00 ..
taxel_11].  Channels are scaled robustly, x' = (x - median) / IQR, with
the scaler fitted on training frames only.  Force targets are never
scaled; errors stay in newtons.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .core import SENSOR_CHANNEL_NAMES, TAXELS_PER_FINGER, Episode

_PRESSURE = (0,)
_STRAIN = (1,)
_TAXELS = tuple(range(2, 2 + TAXELS_PER_FINGER))


class FeatureSet(str, Enum):
    """Input-channel combination fed to a model."""

    T1 = "t1"  # input pressure only
    T2 = "t2"  # strain only
    T3 = "t3"  # taxels only
    T4 = "t4"  # input pressure + strain
    T5 = "t5"  # input pressure + taxels
    T6 = "t6"  # strain + taxels
    T7 = "t7"  # input pressure + strain + taxels

    @property
    def channel_indices(self) -> tuple[int, ...]:
        return _FEATURE_CHANNELS[self]

    @property
    def channel_names(self) -> tuple[str, ...]:
        return tuple(SENSOR_CHANNEL_NAMES[i] for i in self.channel_indices)

    @property
    def dim(self) -> int:
        return len(self.channel_indices)


_FEATURE_CHANNELS = {
    FeatureSet.T1: _PRESSURE,
    FeatureSet.T2: _STRAIN,
    FeatureSet.T3: _TAXELS,
    FeatureSet.T4: _PRESSURE + _STRAIN,
    FeatureSet.T5: _PRESSURE + _TAXELS,
    FeatureSet.T6: _STRAIN + _TAXELS,
    FeatureSet.T7: _PRESSURE + _STRAIN + _TAXELS,
}

CONSTANT_IQR_EPS = 1e-12


@dataclass(frozen=True)
class RobustScalerParams:
    """Per-channel median/IQR over the full 14-channel sensor matrix."""

    median: np.ndarray  # (14,)
    iqr: np.ndarray  # (14,), raw Q3 - Q1 (may be ~0 for constant channels)
    channels: tuple[str, ...] = SENSOR_CHANNEL_NAMES

    def __post_init__(self):
        median = np.asarray(self.median, dtype=np.float64)
        iqr = np.asarray(self.iqr, dtype=np.float64)
        object.__setattr__(self, "median", median)
        object.__setattr__(self, "iqr", iqr)
        object.__setattr__(self, "channels", tuple(self.channels))
        if median.shape != (len(self.channels),) or iqr.shape != median.shape:
            raise ValueError("median/iqr must be one value per channel")
        if np.any(iqr < 0):
            raise ValueError("IQR cannot be negative")

    @property
    def constant_channels(self) -> tuple[str, ...]:
        """Channels whose training IQR was (numerically) zero."""
        flat = np.flatnonzero(self.iqr < CONSTANT_IQR_EPS)
        return tuple(self.channels[i] for i in flat)

    @property
    def scale(self) -> np.ndarray:
        """Effective divisor: the IQR, or 1 for constant channels."""
        return np.where(self.iqr < CONSTANT_IQR_EPS, 1.0, self.iqr)

    def fingerprint(self) -> str:
        import hashlib

        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.median).tobytes())
        h.update(np.ascontiguousarray(self.iqr).tobytes())
        h.update(",".join(self.channels).encode())
        return h.hexdigest()

    def to_dict(self) -> dict:
        return {
            "median": self.median.tolist(),
            "iqr": self.iqr.tolist(),
            "channels": list(self.channels),
        }

    @staticmethod
    def from_dict(d: dict) -> "RobustScalerParams":
        return RobustScalerParams(
            median=np.asarray(d["median"], dtype=np.float64),
            iqr=np.asarray(d["iqr"], dtype=np.float64),
            channels=tuple(d["channels"]),
        )

    def save(self, path: Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @staticmethod
    def load(path: Path) -> "RobustScalerParams":
        return RobustScalerParams.from_dict(json.loads(Path(path).read_text()))


def fit_scaler(train_frames: np.ndarray) -> RobustScalerParams:
    """Median and IQR per channel, percentiles by linear interpolation.

    ``train_frames`` is (n, 14); fit on training frames only so validation
    and holdout data never leak into the scaling.
    """
    x = np.asarray(train_frames, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != len(SENSOR_CHANNEL_NAMES):
        raise ValueError(
            f"expected (n, {len(SENSOR_CHANNEL_NAMES)}) frame matrix, got {x.shape}"
        )
    if x.shape[0] < 4:
        raise ValueError("need at least 4 frames to fit quartiles")
    q1, med, q3 = np.percentile(x, [25.0, 50.0, 75.0], axis=0)
    return RobustScalerParams(median=med, iqr=q3 - q1)


def transform(
    frames: np.ndarray, params: RobustScalerParams, fs: FeatureSet
) -> np.ndarray:
    """Scale the full frame matrix and select the feature set's channels."""
    x = np.asarray(frames, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != len(params.channels):
        raise ValueError(
            f"frame matrix has {x.shape[1] if x.ndim == 2 else '?'} channels, "
            f"scaler was fitted on {len(params.channels)}"
        )
    scaled = (x - params.median) / params.scale
    return scaled[:, list(FeatureSet(fs).channel_indices)]


def inverse_transform_channels(
    scaled: np.ndarray, params: RobustScalerParams
) -> np.ndarray:
    """Undo the scaling on a full 14-channel matrix (round-trip checks)."""
    return np.asarray(scaled, dtype=np.float64) * params.scale + params.median


def window(
    features: np.ndarray, targets: np.ndarray, length: int, stride: int = 1
) -> tuple[np.ndarray, np.ndarray]:
    """Cut one episode's feature matrix into overlapping windows.

    Returns (windows (m, length, d), labels (m, 3)); each label is the
    force at its window's final frame.  Windows never cross episode
    boundaries because this operates on one episode at a time.
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if length < 1 or stride < 1:
        raise ValueError("window length and stride must be >= 1")
    if len(x) != len(y):
        raise ValueError("features and targets must align per frame")
    if len(x) < length:
        raise ValueError(f"episode of {len(x)} frames is shorter than window {length}")
    ends = np.arange(length - 1, len(x), stride)
    idx = ends[:, None] + np.arange(-length + 1, 1)[None, :]
    return x[idx], y[ends]


def episode_windows(
    episode: Episode,
    params: RobustScalerParams,
    fs: FeatureSet,
    length: int,
    stride: int = 1,
) -> tuple[np.ndarray, np.ndarray] | None:
    """Scaled windows for one episode, or None (with a warning) if too short."""
    if len(episode) < length:
        warnings.warn(
            f"skipping episode of {len(episode)} frames: shorter than "
            f"window length {length}",
            stacklevel=2,
        )
        return None
    features = transform(episode.sensor_matrix(), params, fs)
    return window(features, episode.forces, length, stride)


def stack_windows(
    episodes: list[Episode],
    params: RobustScalerParams,
    fs: FeatureSet,
    length: int,
    stride: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """Concatenate windows of many episodes into one (m, L, d) batch."""
    xs, ys = [], []
    for ep in episodes:
        pair = episode_windows(ep, params, fs, length, stride)
        if pair is not None:
            xs.append(pair[0])
            ys.append(pair[1])
    if not xs:
        raise ValueError("no episode was long enough to window")
    return np.concatenate(xs, axis=0), np.concatenate(ys, axis=0)
