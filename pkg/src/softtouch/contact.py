"""Grasp contact-state classification and scenario replay.

Per frame the force splits into a normal magnitude F_n = sqrt(fy^2+fz^2)
and a friction magnitude F_f = |fx|.  No contact when F_n is below a
small epsilon; otherwise the ratio F_f/F_n decides stick (below the
friction threshold) versus slip (above).  A hysteresis band around the
threshold plus a dwell-count debounce keep the state machine from
chattering on noisy estimates.

Note the threshold geometry: on ideal data a slipping contact rides the
Coulomb limit, so its ratio equals mu exactly and never rises above it.
Detecting slip there requires the effective slip threshold
(mu_threshold + ratio_hysteresis) to sit slightly below the material mu;
the defaults instead favor noisy estimated forces, where overshoot above
mu is common.  Both are ordinary config choices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .core import DEFAULT_CONTACT_EPS_N, DT, ForceVector, Phase
from .neural.models import ModelWeights, predict
from .preprocess import transform
from .simulate.scenarios import Scenario, ScenarioEpisode, simulate_scenario


@dataclass(frozen=True)
class ContactStateConfig:
    mu_threshold: float = 0.6  # friction coefficient of the contact pair
    contact_eps: float = DEFAULT_CONTACT_EPS_N  # newtons
    ratio_hysteresis: float = 0.05  # half-width of the hold band
    min_dwell: int = 5  # frames a new state must persist before committing

    def __post_init__(self):
        if self.mu_threshold <= 0:
            raise ValueError("mu_threshold must be > 0")
        if self.min_dwell < 1:
            raise ValueError("min_dwell must be >= 1")
        if self.ratio_hysteresis < 0 or self.contact_eps < 0:
            raise ValueError("ratio_hysteresis and contact_eps must be >= 0")


class StateKind(str, Enum):
    NONCONTACT = "noncontact"
    STICK = "stick"
    SLIP = "slip"

    @property
    def in_contact(self) -> bool:
        """Derived predicate: stick and slip are both contact."""
        return self != StateKind.NONCONTACT


@dataclass(frozen=True)
class ContactState:
    """Classified state plus the per-frame friction measurements."""

    kind: StateKind
    f_n: float  # newtons
    f_f: float  # newtons
    ratio: float | None  # undefined (None) when f_n <= contact_eps


class EventKind(str, Enum):
    CONTACT_ONSET = "contact_onset"
    SLIP_ONSET = "slip_onset"
    RELEASE = "release"


@dataclass(frozen=True)
class Event:
    kind: EventKind
    frame: int

    @property
    def t(self) -> float:
        return self.frame * DT

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "frame": self.frame, "t": self.t}


def _measure(f) -> tuple[float, float]:
    if isinstance(f, ForceVector):
        fx, fy, fz = f.fx, f.fy, f.fz
    else:
        fx, fy, fz = (float(v) for v in f)
    return math.hypot(fy, fz), abs(fx)


def classify_frame(
    f, cfg: ContactStateConfig, prev: StateKind = StateKind.NONCONTACT
) -> ContactState:
    """Instantaneous rule with hysteresis; debounce lives in the stream.

    Below contact_eps the state is noncontact.  Otherwise stick when the
    ratio is under mu_threshold - band, slip when over mu_threshold +
    band, and the previous state inside the band.
    """
    f_n, f_f = _measure(f)
    if not (math.isfinite(f_n) and math.isfinite(f_f)):
        raise ValueError("force components must be finite")
    if f_n <= cfg.contact_eps:
        return ContactState(StateKind.NONCONTACT, f_n, f_f, None)
    ratio = f_f / f_n
    if ratio < cfg.mu_threshold - cfg.ratio_hysteresis:
        kind = StateKind.STICK
    elif ratio > cfg.mu_threshold + cfg.ratio_hysteresis:
        kind = StateKind.SLIP
    elif prev.in_contact:
        kind = prev  # hold inside the band
    else:
        kind = StateKind.STICK  # entering contact inside the band
    return ContactState(kind, f_n, f_f, ratio)


class StreamClassifier:
    """Sequential debounced state machine over a force stream."""

    def __init__(self, cfg: ContactStateConfig):
        self.cfg = cfg
        self.committed: StateKind | None = None  # first frame initializes
        self.candidate: StateKind | None = None
        self.count = 0
        self.frame = -1
        self.events: list[Event] = []

    def push(self, f) -> ContactState:
        self.frame += 1
        prev = self.committed if self.committed is not None else StateKind.NONCONTACT
        raw = classify_frame(f, self.cfg, prev=prev)
        if self.committed is None:
            # The stream starts mid-whatever; no transition, no event.
            self.committed = raw.kind
            return raw
        if raw.kind == self.committed:
            self.candidate = None
            self.count = 0
        elif raw.kind == self.candidate:
            self.count += 1
        else:
            self.candidate = raw.kind
            self.count = 1
        if self.candidate is not None and self.count >= self.cfg.min_dwell:
            self._commit(self.candidate)
        return ContactState(self.committed, raw.f_n, raw.f_f, raw.ratio)

    def _commit(self, kind: StateKind) -> None:
        prev = self.committed
        self.committed = kind
        self.candidate = None
        self.count = 0
        if not prev.in_contact and kind.in_contact:
            self.events.append(Event(EventKind.CONTACT_ONSET, self.frame))
        if kind == StateKind.SLIP and prev != StateKind.SLIP:
            self.events.append(Event(EventKind.SLIP_ONSET, self.frame))
        if prev.in_contact and kind == StateKind.NONCONTACT:
            self.events.append(Event(EventKind.RELEASE, self.frame))


def classify_stream(
    forces, cfg: ContactStateConfig | None = None
) -> tuple[list[ContactState], list[Event]]:
    """Classify a time-ordered force sequence; replays are idempotent."""
    cfg = cfg or ContactStateConfig()
    machine = StreamClassifier(cfg)
    states = [machine.push(f) for f in forces]
    return states, machine.events


def friction_coefficient_estimate(
    forces,
    slipping=None,
    cfg: ContactStateConfig | None = None,
) -> float:
    """Median F_f/F_n over slipping frames.

    ``slipping`` is an optional boolean mask of known slip frames (for
    example the simulator's flags); without it the debounced stream
    classifier picks the slip frames.  Frames whose normal force is below
    contact_eps are excluded (their ratio is undefined).
    """
    cfg = cfg or ContactStateConfig()
    forces = np.asarray(forces, dtype=np.float64)
    if slipping is None:
        states, _ = classify_stream(forces, cfg)
        slipping = np.array([s.kind == StateKind.SLIP for s in states])
    else:
        slipping = np.asarray(slipping, dtype=bool)
    f_n = np.hypot(forces[:, 1], forces[:, 2])
    f_f = np.abs(forces[:, 0])
    use = slipping & (f_n > cfg.contact_eps)
    if np.count_nonzero(use) < cfg.min_dwell:
        raise ValueError(
            f"no slip observed: {np.count_nonzero(use)} usable slipping "
            f"frames < min_dwell {cfg.min_dwell}"
        )
    return float(np.median(f_f[use] / f_n[use]))


# --- scenario replay -------------------------------------------------------


@dataclass(frozen=True)
class ReplayConfig:
    """Settings for replaying a scenario through a trained model."""

    contact: ContactStateConfig = field(default_factory=ContactStateConfig)
    excursion_threshold: float | None = None  # newtons; None -> calibrate
    smooth_frames: int = 15  # moving-average width for the excursion trace
    noise: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.smooth_frames < 1:
            raise ValueError("smooth_frames must be >= 1")


CALIBRATION_SEEDS = (900, 901, 902)
CALIBRATION_FACTOR = 3.0  # threshold = factor x success-case peak deviation


@dataclass(frozen=True)
class ExcursionEvent:
    """A debounced run of frames whose normal force exceeds the threshold."""

    start_frame: int
    end_frame: int  # exclusive
    peak_deviation: float  # newtons above the settled baseline

    def to_dict(self) -> dict:
        return {
            "start_frame": self.start_frame,
            "end_frame": self.end_frame,
            "start_t": self.start_frame * DT,
            "peak_deviation": self.peak_deviation,
        }


@dataclass
class ScenarioReport:
    scenario: Scenario
    seed: int
    threshold: float | None  # None when the scenario has no insertion window
    peak_deviation: float
    excursion_events: list[ExcursionEvent]
    contact_events: list[Event]
    excursion_timing_error_s: float | None  # first event vs truth onset
    slip_timing_error_frames: int | None  # detected slip vs simulator truth
    estimate_rmse: float | None  # newtons, pooled, None on ground-truth replay
    insertion: tuple[int, int] | None

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario.value,
            "seed": self.seed,
            "threshold": self.threshold,
            "peak_deviation": self.peak_deviation,
            "excursion_events": [e.to_dict() for e in self.excursion_events],
            "contact_events": [e.to_dict() for e in self.contact_events],
            "excursion_timing_error_s": self.excursion_timing_error_s,
            "slip_timing_error_frames": self.slip_timing_error_frames,
            "estimate_rmse": self.estimate_rmse,
            "insertion": list(self.insertion) if self.insertion else None,
        }


def estimate_forces_from_sensors(weights: ModelWeights, sensors: np.ndarray) -> np.ndarray:
    """Per-frame (n, 3) force estimates from a raw (n, 14) sensor matrix.

    The sensors are scaled with the bundled preprocessing, edge-padded at
    the start so the first window is full, and run through the model with
    stride 1: one estimate per frame.
    """
    bundle = weights.preprocess
    if bundle is None:
        raise ValueError("weights carry no preprocessing bundle")
    features = transform(np.asarray(sensors, dtype=np.float64), bundle.scaler, bundle.feature_set)
    length = bundle.window_length
    padded = np.concatenate([np.repeat(features[:1], length - 1, axis=0), features])
    idx = np.arange(len(features))[:, None] + np.arange(length)[None, :]
    return predict(weights, padded[idx])


def estimate_forces(weights: ModelWeights, episode) -> np.ndarray:
    """Per-frame (n, 3) force estimates for one episode."""
    return estimate_forces_from_sensors(weights, episode.sensor_matrix())


def _moving_average(x: np.ndarray, width: int) -> np.ndarray:
    if width <= 1:
        return x.astype(np.float64, copy=True)
    kernel = np.ones(width) / width
    # Edge-pad so the smoothed trace keeps the input length and scale.
    padded = np.concatenate([np.repeat(x[:1], width - 1), x])
    return np.convolve(padded, kernel, mode="valid")


def excursion_trace(
    forces: np.ndarray, episode, smooth_frames: int
) -> np.ndarray:
    """Smoothed normal-force rise above the settled grasp level, newtons."""
    f_n = np.hypot(forces[:, 1], forces[:, 2])
    smooth = _moving_average(f_n, smooth_frames)
    settle = np.flatnonzero(episode.phases == Phase.CONTACT_SETTLE)
    if settle.size == 0:
        raise ValueError("episode has no settle phase to baseline against")
    # The finger loads up gradually across the settle phase; only its tail
    # reflects the settled grasp level.
    tail = settle[-max(1, settle.size // 5):]
    baseline = float(np.median(smooth[tail]))
    return np.maximum(0.0, smooth - baseline)


def detect_excursions(
    deviation: np.ndarray,
    threshold: float,
    window: tuple[int, int],
    min_dwell: int,
) -> list[ExcursionEvent]:
    """Runs of at least min_dwell frames above threshold inside the window."""
    lo, hi = window
    above = np.zeros(len(deviation), dtype=bool)
    above[lo:hi] = deviation[lo:hi] > threshold
    events = []
    edges = np.flatnonzero(np.diff(above.astype(np.int8)))
    starts = [int(i) + 1 for i in edges if not above[i]]
    ends = [int(i) + 1 for i in edges if above[i]]
    if above[0]:
        starts.insert(0, 0)
    if above[-1]:
        ends.append(len(above))
    for s, e in zip(starts, ends):
        if e - s >= min_dwell:
            events.append(
                ExcursionEvent(
                    start_frame=s,
                    end_frame=e,
                    peak_deviation=float(np.max(deviation[s:e])),
                )
            )
    return events


def calibrate_excursion_threshold(
    weights: ModelWeights | None,
    cfg: ReplayConfig,
    seeds: tuple[int, ...] = CALIBRATION_SEEDS,
) -> float:
    """Threshold = CALIBRATION_FACTOR x worst success-case peak deviation."""
    peaks = []
    for seed in seeds:
        sc = simulate_scenario(Scenario.PLUG_SUCCESS, seed=seed, noise=cfg.noise)
        forces = (
            sc.episode.forces
            if weights is None
            else estimate_forces(weights, sc.episode)
        )
        deviation = excursion_trace(forces, sc.episode, cfg.smooth_frames)
        lo, hi = sc.insertion
        peaks.append(float(np.max(deviation[lo:hi])))
    return CALIBRATION_FACTOR * max(peaks)


def replay_scenario(
    scenario: Scenario,
    weights: ModelWeights | None,
    cfg: ReplayConfig | None = None,
) -> ScenarioReport:
    """Simulate a scenario, estimate forces, classify, detect excursions.

    With ``weights=None`` the replay runs on ground-truth forces, which
    isolates the detection layer from the regression model.
    """
    cfg = cfg or ReplayConfig()
    scenario = Scenario(scenario)
    sc = simulate_scenario(scenario, seed=cfg.seed, noise=cfg.noise)
    if weights is None:
        forces = sc.episode.forces
        estimate_rmse = None
    else:
        forces = estimate_forces(weights, sc.episode)
        err = forces - sc.episode.forces
        estimate_rmse = float(np.sqrt(np.mean(err * err)))

    _, contact_events = classify_stream(forces, cfg.contact)

    slip_timing = None
    if sc.truth_slip_frame is not None:
        detected = [e for e in contact_events if e.kind == EventKind.SLIP_ONSET]
        if detected:
            slip_timing = detected[0].frame - sc.truth_slip_frame

    threshold = cfg.excursion_threshold
    excursions: list[ExcursionEvent] = []
    peak = 0.0
    timing_error = None
    if sc.insertion is not None:
        if threshold is None:
            threshold = calibrate_excursion_threshold(weights, cfg)
        deviation = excursion_trace(forces, sc.episode, cfg.smooth_frames)
        lo, hi = sc.insertion
        peak = float(np.max(deviation[lo:hi]))
        excursions = detect_excursions(
            deviation, threshold, sc.insertion, cfg.contact.min_dwell
        )
        truth_above = np.flatnonzero(sc.disturbance > threshold)
        if excursions and truth_above.size:
            timing_error = (excursions[0].start_frame - int(truth_above[0])) * DT
    return ScenarioReport(
        scenario=scenario,
        seed=cfg.seed,
        threshold=None if threshold is None else float(threshold),
        peak_deviation=peak,
        excursion_events=excursions,
        contact_events=contact_events,
        excursion_timing_error_s=timing_error,
        slip_timing_error_frames=slip_timing,
        estimate_rmse=estimate_rmse,
        insertion=sc.insertion,
    )
