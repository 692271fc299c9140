"""Contact-state classification, excursion detection, and replay tests."""

from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from softtouch.contact import (
    CALIBRATION_FACTOR,
    ContactStateConfig,
    Event,
    EventKind,
    ExcursionEvent,
    ReplayConfig,
    StateKind,
    StreamClassifier,
    _moving_average,
    classify_frame,
    classify_stream,
    detect_excursions,
    estimate_forces_from_sensors,
    excursion_trace,
    friction_coefficient_estimate,
    replay_scenario,
)
from softtouch.core import DT, ForceVector, Phase
from softtouch.simulate.scenarios import Scenario

# Effective slip threshold below the simulator's mu of 0.6, because ideal
# slipping contact rides the Coulomb limit at exactly mu.
TRUTH_CFG = ContactStateConfig(mu_threshold=0.58, ratio_hysteresis=0.01)


def test_config_validation():
    with pytest.raises(ValueError, match="mu_threshold"):
        ContactStateConfig(mu_threshold=0.0)
    with pytest.raises(ValueError, match="min_dwell"):
        ContactStateConfig(min_dwell=0)
    with pytest.raises(ValueError, match=">= 0"):
        ContactStateConfig(ratio_hysteresis=-0.1)


def test_classify_frame_hand_examples():
    cfg = ContactStateConfig()
    # 3-4-5 triangle: F_n = 5, F_f = 1, ratio 0.2 -> stick.
    s = classify_frame((1.0, 4.0, 3.0), cfg)
    assert s.kind == StateKind.STICK
    assert s.f_n == pytest.approx(5.0)
    assert s.f_f == pytest.approx(1.0)
    assert s.ratio == pytest.approx(0.2)
    # Same normal force, ratio 0.8 -> slip.
    assert classify_frame((4.0, 4.0, 3.0), cfg).kind == StateKind.SLIP
    assert classify_frame((-4.0, 4.0, 3.0), cfg).kind == StateKind.SLIP
    # Below the contact epsilon the ratio is undefined.
    s = classify_frame((0.0, 0.0, 0.0), cfg)
    assert s.kind == StateKind.NONCONTACT
    assert s.ratio is None


def test_classify_frame_accepts_force_vector():
    s = classify_frame(ForceVector(1.0, 4.0, 3.0), ContactStateConfig())
    assert s.kind == StateKind.STICK
    assert s.f_n == pytest.approx(5.0)


def test_classify_frame_band_holds_previous_state():
    cfg = ContactStateConfig(mu_threshold=0.6, ratio_hysteresis=0.05)
    in_band = (0.6, 1.0, 0.0)  # ratio exactly at the threshold center
    assert classify_frame(in_band, cfg, prev=StateKind.STICK).kind == StateKind.STICK
    assert classify_frame(in_band, cfg, prev=StateKind.SLIP).kind == StateKind.SLIP
    # Entering contact already inside the band defaults to stick.
    assert (
        classify_frame(in_band, cfg, prev=StateKind.NONCONTACT).kind
        == StateKind.STICK
    )


def test_classify_frame_rejects_non_finite():
    with pytest.raises(ValueError, match="finite"):
        classify_frame((np.nan, 1.0, 0.0), ContactStateConfig())


@given(
    fx=st.floats(-50, 50),
    fy=st.floats(-50, 50),
    fz=st.floats(-50, 50),
    scale=st.floats(0.01, 100),
)
@settings(max_examples=100, deadline=None)
def test_classification_is_scale_invariant(fx, fy, fz, scale):
    # The ratio rule ignores overall force magnitude once clear of the
    # contact epsilon, so scaling the force cannot change the state.
    cfg = ContactStateConfig(contact_eps=0.0)
    f_n = np.hypot(fy, fz)
    if f_n < 1e-6 or f_n * scale < 1e-6:
        return
    a = classify_frame((fx, fy, fz), cfg)
    b = classify_frame((fx * scale, fy * scale, fz * scale), cfg)
    if a.kind != b.kind:
        # Only possible when both ratios sit inside the hold band.
        assert abs(a.ratio - cfg.mu_threshold) <= cfg.ratio_hysteresis * (1 + 1e-9)


def _frames(*segments):
    """Build a force stream from (frame_tuple, repeat) segments."""
    out = []
    for f, n in segments:
        out.extend([f] * n)
    return out


STICK_F = (1.0, 4.0, 3.0)  # ratio 0.2
SLIP_F = (4.0, 4.0, 3.0)  # ratio 0.8
ZERO_F = (0.0, 0.0, 0.0)


def test_stream_lifecycle_events():
    cfg = ContactStateConfig(min_dwell=3)
    frames = _frames((ZERO_F, 10), (STICK_F, 10), (SLIP_F, 10), (ZERO_F, 10))
    states, events = classify_stream(frames, cfg)
    assert len(states) == 40
    assert [e.kind for e in events] == [
        EventKind.CONTACT_ONSET,
        EventKind.SLIP_ONSET,
        EventKind.RELEASE,
    ]
    # Dwell of 3: the new state is committed on its third frame.
    assert [e.frame for e in events] == [12, 22, 32]


def test_stream_debounce_rejects_short_blips():
    cfg = ContactStateConfig(min_dwell=5)
    frames = _frames((STICK_F, 10), (SLIP_F, 4), (STICK_F, 10))
    states, events = classify_stream(frames, cfg)
    # A 4-frame slip burst never reaches the 5-frame dwell.
    assert all(s.kind == StateKind.STICK for s in states)
    assert events == []


def test_stream_debounce_commits_exact_dwell():
    cfg = ContactStateConfig(min_dwell=5)
    frames = _frames((STICK_F, 10), (SLIP_F, 5), (STICK_F, 10))
    _, events = classify_stream(frames, cfg)
    assert [(e.kind, e.frame) for e in events] == [(EventKind.SLIP_ONSET, 14)]


def test_stream_interrupted_candidate_restarts_count():
    cfg = ContactStateConfig(min_dwell=4)
    # 3 slip frames, 1 stick, then 3 more slip: the interruption resets the
    # dwell counter, so no commit happens anywhere.
    frames = _frames((STICK_F, 6), (SLIP_F, 3), (STICK_F, 1), (SLIP_F, 3))
    states, events = classify_stream(frames, cfg)
    assert events == []
    assert states[-1].kind == StateKind.STICK


def test_stream_first_frame_initializes_without_event():
    # A stream that starts mid-slip adopts slip silently.
    states, events = classify_stream(_frames((SLIP_F, 8)), ContactStateConfig())
    assert states[0].kind == StateKind.SLIP
    assert events == []


def test_stream_noncontact_to_slip_emits_both_onsets():
    cfg = ContactStateConfig(min_dwell=2)
    frames = _frames((ZERO_F, 5), (SLIP_F, 6))
    _, events = classify_stream(frames, cfg)
    kinds = [e.kind for e in events]
    assert kinds == [EventKind.CONTACT_ONSET, EventKind.SLIP_ONSET]
    assert events[0].frame == events[1].frame


def test_all_zero_stream_is_quiet():
    states, events = classify_stream(_frames((ZERO_F, 30)), ContactStateConfig())
    assert all(s.kind == StateKind.NONCONTACT for s in states)
    assert events == []


def test_event_time_uses_sample_spacing():
    e = Event(EventKind.SLIP_ONSET, 250)
    assert e.t == pytest.approx(250 * DT)
    assert e.to_dict() == {"kind": "slip_onset", "frame": 250, "t": 250 * DT}


def test_friction_estimate_with_truth_mask(clean_episode):
    mu = friction_coefficient_estimate(
        clean_episode.forces, slipping=clean_episode.slipping
    )
    # Ideal slipping frames ride the Coulomb limit exactly.
    assert mu == pytest.approx(0.6, abs=1e-9)


def test_friction_estimate_from_classifier(clean_episode):
    mu = friction_coefficient_estimate(clean_episode.forces, cfg=TRUTH_CFG)
    assert mu == pytest.approx(0.6, abs=1e-6)


def test_friction_estimate_requires_slip():
    forces = np.tile([1.0, 4.0, 3.0], (50, 1))  # all stick
    with pytest.raises(ValueError, match="no slip observed"):
        friction_coefficient_estimate(forces, slipping=np.zeros(50, dtype=bool))


def test_moving_average_hand_oracle():
    x = np.array([0.0, 3.0, 6.0, 3.0])
    # Width 3 with edge padding: [0,0,0,3,6,3] -> means [0, 1, 3, 4].
    assert np.allclose(_moving_average(x, 3), [0.0, 1.0, 3.0, 4.0])
    assert np.array_equal(_moving_average(x, 1), x)
    out = _moving_average(x, 1)
    out[0] = 99.0
    assert x[0] == 0.0  # width 1 still returns a copy


def test_moving_average_preserves_constants():
    x = np.full(20, 2.5)
    assert np.allclose(_moving_average(x, 7), 2.5)
    assert len(_moving_average(x, 7)) == 20


def test_excursion_trace_baselines_on_settle_tail():
    # Synthetic episode: normal force ramps through most of settle, levels
    # off at 3 N before the settle tail, then a 2 N bump.  The baseline
    # must sit at the plateau, not the mid-ramp median.
    n = 300
    phases = np.full(n, Phase.MOVING.value)
    phases[:100] = Phase.CONTACT_SETTLE.value
    fy = np.concatenate(
        [np.linspace(0.0, 3.0, 80), np.full(220, 3.0)]
    )
    fy[150:180] += 2.0
    forces = np.zeros((n, 3))
    forces[:, 1] = fy
    episode = SimpleNamespace(phases=phases)
    trace = excursion_trace(forces, episode, smooth_frames=1)
    assert trace[120] == pytest.approx(0.0, abs=1e-9)
    assert trace[160] == pytest.approx(2.0, abs=1e-9)
    assert np.all(trace >= 0.0)


def test_excursion_trace_requires_settle_phase():
    episode = SimpleNamespace(phases=np.full(10, Phase.MOVING.value))
    with pytest.raises(ValueError, match="no settle phase"):
        excursion_trace(np.zeros((10, 3)), episode, smooth_frames=1)


def test_detect_excursions_runs_and_debounce():
    deviation = np.zeros(100)
    deviation[10:20] = 2.0  # 10-frame run
    deviation[30:33] = 2.0  # 3-frame run, below dwell
    deviation[40:50] = 2.0  # run outside the window
    events = detect_excursions(deviation, 1.0, window=(0, 35), min_dwell=5)
    assert len(events) == 1
    assert (events[0].start_frame, events[0].end_frame) == (10, 20)
    assert events[0].peak_deviation == pytest.approx(2.0)


def test_detect_excursions_window_boundaries():
    deviation = np.full(50, 2.0)
    # Everything above threshold, but only the window slice counts.
    events = detect_excursions(deviation, 1.0, window=(5, 12), min_dwell=5)
    assert [(e.start_frame, e.end_frame) for e in events] == [(5, 12)]
    # Run touching the array end is still closed off correctly.
    dev2 = np.zeros(50)
    dev2[44:] = 3.0
    events2 = detect_excursions(dev2, 1.0, window=(0, 50), min_dwell=5)
    assert [(e.start_frame, e.end_frame) for e in events2] == [(44, 50)]


def test_detect_excursions_threshold_is_strict():
    deviation = np.full(20, 1.0)
    assert detect_excursions(deviation, 1.0, (0, 20), 1) == []
    assert len(detect_excursions(deviation, 0.999, (0, 20), 1)) == 1


def test_excursion_event_to_dict():
    e = ExcursionEvent(start_frame=10, end_frame=20, peak_deviation=1.5)
    d = e.to_dict()
    assert d["start_t"] == pytest.approx(10 * DT)
    assert d["peak_deviation"] == 1.5


def test_estimate_forces_requires_bundle():
    from softtouch.neural.models import ModelSpec, init_weights

    bare = init_weights(ModelSpec("mlp", 1, 4, in_dim=14), seed=0)
    with pytest.raises(ValueError, match="no preprocessing bundle"):
        estimate_forces_from_sensors(bare, np.zeros((10, 14)))


def test_estimate_forces_one_row_per_frame():
    from softtouch.neural.models import (
        ModelSpec,
        PreprocessBundle,
        init_weights,
        predict,
    )
    from softtouch.preprocess import FeatureSet, RobustScalerParams, transform

    scaler = RobustScalerParams(median=np.zeros(14), iqr=np.ones(14))
    w = init_weights(ModelSpec("gru", 1, 4, in_dim=14), seed=2)
    w.preprocess = PreprocessBundle(
        feature_set=FeatureSet.T7, window_length=5, scaler=scaler
    )
    rng = np.random.default_rng(3)
    sensors = rng.normal(size=(30, 14))
    est = estimate_forces_from_sensors(w, sensors)
    assert est.shape == (30, 3)
    # Frame 20 sees exactly the window of scaled frames 16..20.
    feats = transform(sensors, scaler, FeatureSet.T7)
    direct = predict(w, feats[16:21][None, :, :])
    assert np.allclose(est[20], direct[0], atol=1e-12)
    # The first frame runs on an edge-padded window of itself.
    padded = np.repeat(feats[:1], 5, axis=0)
    assert np.allclose(est[0], predict(w, padded[None])[0], atol=1e-12)


def test_replay_slip_test_on_ground_truth():
    cfg = ReplayConfig(contact=TRUTH_CFG, noise=False)
    report = replay_scenario(Scenario.SLIP_TEST, weights=None, cfg=cfg)
    assert report.scenario == Scenario.SLIP_TEST
    assert report.insertion is None
    assert report.threshold is None  # no insertion window, nothing calibrated
    assert report.estimate_rmse is None
    assert report.excursion_events == []
    assert report.slip_timing_error_frames is not None
    # Ground-truth forces put detected slip within the debounce dwell.
    assert 0 <= report.slip_timing_error_frames <= TRUTH_CFG.min_dwell
    d = report.to_dict()
    assert d["scenario"] == "slip_test"
    assert d["insertion"] is None


def test_replay_overpush_with_fixed_threshold():
    cfg = ReplayConfig(contact=TRUTH_CFG, excursion_threshold=1.0, noise=False)
    report = replay_scenario(Scenario.PLUG_OVERPUSH, weights=None, cfg=cfg)
    assert report.threshold == 1.0
    assert report.insertion is not None
    assert len(report.excursion_events) >= 1
    assert report.peak_deviation > 1.0
    assert report.excursion_timing_error_s is not None
    # The detector can only lag the truth crossing (smoothing), never lead
    # it by more than the smoothing window.
    assert abs(report.excursion_timing_error_s) < cfg.smooth_frames * DT * 2


def test_replay_success_with_fixed_threshold():
    cfg = ReplayConfig(contact=TRUTH_CFG, excursion_threshold=1.0, noise=False)
    report = replay_scenario(Scenario.PLUG_SUCCESS, weights=None, cfg=cfg)
    assert report.excursion_events == []
    assert report.peak_deviation < 1.0


def test_replay_config_validation():
    with pytest.raises(ValueError, match="smooth_frames"):
        ReplayConfig(smooth_frames=0)
    assert CALIBRATION_FACTOR == 3.0
