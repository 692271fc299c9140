"""Sensor corruption: the pathologies of soft capacitive sensors.

Clean per-taxel forces and the strain signal pass through, in order:
saturation nonlinearity, play-operator (backlash) hysteresis, crosstalk
between adjacent taxels, slow exponential baseline drift, Gaussian noise,
and occasional spike outliers.  Everything is deterministic given the
model's seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..core import TAXELS_PER_FINGER


def default_crosstalk_matrix(
    count: int = TAXELS_PER_FINGER, coupling: float = 0.15
) -> np.ndarray:
    """Row-normalized mixing: each taxel leaks `coupling` to each neighbor."""
    m = np.zeros((count, count))
    for j in range(count):
        neighbors = [k for k in (j - 1, j + 1) if 0 <= k < count]
        for k in neighbors:
            m[j, k] = coupling
        m[j, j] = 1.0 - coupling * len(neighbors)
    return m


@dataclass(frozen=True)
class SensorArtifactModel:
    """Parameters of the corruption pipeline, one instance per episode."""

    play_width: float = 0.02  # backlash half-width, capacitance units
    saturation_a: float = 0.55  # capacitance per newton at small force
    saturation_b: float = 0.14  # 1/N, compressive saturation
    crosstalk: np.ndarray = field(default_factory=default_crosstalk_matrix)
    drift_rate: float = 0.05  # 1/s
    drift_amp: float = 0.04  # capacitance units at full drift
    noise_sigma: float = 0.006
    outlier_prob: float = 0.002  # per sample
    seed: int = 0

    ROW_TOL = 1e-9
    MIN_DIAGONAL = 0.65

    def __post_init__(self):
        m = np.asarray(self.crosstalk, dtype=np.float64)
        object.__setattr__(self, "crosstalk", m)
        if m.shape != (TAXELS_PER_FINGER, TAXELS_PER_FINGER):
            raise ValueError(
                f"crosstalk must be {TAXELS_PER_FINGER}x{TAXELS_PER_FINGER}"
            )
        if np.any(np.abs(m.sum(axis=1) - 1.0) > self.ROW_TOL):
            raise ValueError("crosstalk rows must sum to 1")
        if np.any(np.diag(m) < self.MIN_DIAGONAL):
            raise ValueError(f"crosstalk diagonal must be >= {self.MIN_DIAGONAL}")
        if self.play_width < 0 or self.noise_sigma < 0 or self.outlier_prob < 0:
            raise ValueError("artifact magnitudes must be nonnegative")
        if self.saturation_a <= 0 or self.saturation_b < 0:
            raise ValueError("saturation must be monotone increasing")

    @staticmethod
    def identity() -> "SensorArtifactModel":
        """Configuration under which corrupt_channels is the identity map."""
        return SensorArtifactModel(
            play_width=0.0,
            saturation_a=1.0,
            saturation_b=0.0,
            crosstalk=np.eye(TAXELS_PER_FINGER),
            drift_rate=0.0,
            drift_amp=0.0,
            noise_sigma=0.0,
            outlier_prob=0.0,
            seed=0,
        )

    def with_seed(self, seed: int) -> "SensorArtifactModel":
        return replace(self, seed=seed)

    def saturate(self, f: np.ndarray) -> np.ndarray:
        return self.saturation_a * f / (1.0 + self.saturation_b * f)


def play_operator(x: np.ndarray, width: float, initial: float = 0.0) -> np.ndarray:
    """Backlash hysteresis: the output follows the input only when dragged.

    y_t is held until x_t exits the band [y - width, y + width]; loading and
    unloading therefore run on branches offset by +-width and the output
    does not return to its start after a load cycle.
    """
    if width == 0.0:
        return x.copy()
    y = np.empty_like(x)
    prev = np.clip(initial, x[0] - width, x[0] + width) if len(x) else initial
    for i in range(len(x)):
        prev = np.clip(prev, x[i] - width, x[i] + width)
        y[i] = prev
    return y


def corrupt_channels(
    strain: np.ndarray,
    taxel_forces: np.ndarray,
    artifacts: SensorArtifactModel,
    t: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Apply the corruption pipeline to one episode's clean channels.

    `strain` is (n,), `taxel_forces` is (n, 12) in newtons; returns the
    corrupted (strain, taxels) readings in capacitance units.
    """
    n = len(strain)
    channels = np.column_stack([strain, taxel_forces])  # (n, 13)

    channels = artifacts.saturate(channels)

    if artifacts.play_width > 0.0:
        out = np.empty_like(channels)
        prev = np.clip(
            np.zeros(channels.shape[1]),
            channels[0] - artifacts.play_width,
            channels[0] + artifacts.play_width,
        )
        for i in range(n):
            prev = np.clip(
                prev, channels[i] - artifacts.play_width, channels[i] + artifacts.play_width
            )
            out[i] = prev
        channels = out

    channels[:, 1:] = channels[:, 1:] @ artifacts.crosstalk.T

    drift = artifacts.drift_amp * (1.0 - np.exp(-artifacts.drift_rate * t))
    channels += drift[:, None]

    rng = np.random.default_rng(artifacts.seed)
    if artifacts.noise_sigma > 0.0:
        channels += artifacts.noise_sigma * rng.standard_normal(channels.shape)
    if artifacts.outlier_prob > 0.0:
        spikes = rng.random(channels.shape) < artifacts.outlier_prob
        spike_value = drift[:, None] + 10.0 * artifacts.noise_sigma
        channels = np.where(spikes, spike_value, channels)

    return channels[:, 0].copy(), channels[:, 1:].copy()
