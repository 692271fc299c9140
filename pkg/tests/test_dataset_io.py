"""Episode persistence, dataset splits and schema validation."""

import json

import numpy as np
import pytest

from softtouch.core import ConditionMeta, ObjectShape
from softtouch.dataset_io import (
    Dataset,
    episode_dir_name,
    infer_holdout_size,
    load_dataset,
    load_episode,
    load_frames_csv,
    save_dataset,
    save_episode,
    validate_dataset,
)


def test_episode_dir_name_is_filesystem_safe():
    meta = ConditionMeta(ObjectShape.CONVEX, 22.5, 40.0, -5.0, 3.0, repetition=2)
    name = episode_dir_name(meta, 7)
    assert name == "ep0007_convex22d5_p40_ym5_z3_r2"
    assert "/" not in name and "." not in name and "-" not in name


def test_save_load_round_trip(clean_episode, tmp_path):
    save_episode(clean_episode, tmp_path / "ep")
    loaded = load_episode(tmp_path / "ep")
    assert loaded.meta == clean_episode.meta
    # 12 significant digits survive the text round trip at this scale
    assert np.allclose(loaded.forces, clean_episode.forces, atol=1e-9)
    assert np.allclose(loaded.strain, clean_episode.strain, atol=1e-9)
    assert np.allclose(loaded.taxels, clean_episode.taxels, atol=1e-9)
    assert np.array_equal(loaded.phases, clean_episode.phases)
    assert np.array_equal(loaded.slipping, clean_episode.slipping)


def test_save_episode_is_byte_deterministic(clean_episode, tmp_path):
    save_episode(clean_episode, tmp_path / "a")
    save_episode(clean_episode, tmp_path / "b")
    assert (tmp_path / "a" / "frames.csv").read_bytes() == (
        tmp_path / "b" / "frames.csv"
    ).read_bytes()
    assert (tmp_path / "a" / "meta.json").read_bytes() == (
        tmp_path / "b" / "meta.json"
    ).read_bytes()


def test_load_episode_rejects_wrong_columns(clean_episode, tmp_path):
    save_episode(clean_episode, tmp_path / "ep")
    csv_path = tmp_path / "ep" / "frames.csv"
    lines = csv_path.read_text().splitlines()
    lines[0] = lines[0].replace("strain", "stretch")
    csv_path.write_text("\n".join(lines) + "\n")
    with pytest.raises(ValueError, match="columns"):
        load_episode(tmp_path / "ep")


def test_load_frames_csv_matches_episode(clean_episode, tmp_path):
    save_episode(clean_episode, tmp_path / "ep")
    data = load_frames_csv(tmp_path / "ep" / "frames.csv")
    assert np.allclose(data["sensors"], clean_episode.sensor_matrix(), atol=1e-9)
    assert np.allclose(data["forces"], clean_episode.forces, atol=1e-9)
    assert np.array_equal(data["slipping"], clean_episode.slipping)


def test_load_frames_csv_missing_file_names_path(tmp_path):
    missing = tmp_path / "nope.csv"
    with pytest.raises(FileNotFoundError, match="nope.csv"):
        load_frames_csv(missing)


def test_dataset_split_semantics(tiny_dataset):
    ds = tiny_dataset
    # tiny sweep: convex 30 and 22; the smaller size is the holdout object
    assert ds.holdout_size == 22.0
    for ep in ds.train_episodes:
        assert ep.meta.repetition <= 3 and not ep.holdout
    for ep in ds.validation_episodes:
        assert ep.meta.repetition == 4 and not ep.holdout
    for ep in ds.holdout_episodes:
        assert ep.meta.object_size == 22.0
    total = (
        len(ds.train_episodes)
        + len(ds.validation_episodes)
        + len(ds.holdout_episodes)
    )
    assert total == len(ds.episodes)


def test_infer_holdout_needs_a_size_range(tiny_dataset):
    only_30 = [
        ep for ep in tiny_dataset.episodes if ep.meta.object_size == 30.0
    ]
    assert infer_holdout_size(only_30) is None


def test_dataset_fingerprint_is_order_invariant(tiny_dataset):
    ds = tiny_dataset
    reordered = Dataset(episodes=list(reversed(ds.episodes)))
    assert ds.fingerprint() == reordered.fingerprint()


def test_dataset_fingerprint_changes_with_labels(tiny_dataset):
    import copy

    episodes = [copy.copy(ep) for ep in tiny_dataset.episodes]
    episodes[0].forces = episodes[0].forces + 1e-6
    assert Dataset(episodes=episodes).fingerprint() != tiny_dataset.fingerprint()


def test_save_and_load_dataset_round_trip(tiny_dataset, tmp_path):
    save_dataset(tiny_dataset.episodes, tmp_path)
    loaded = load_dataset(tmp_path)
    assert len(loaded.episodes) == len(tiny_dataset.episodes)
    assert loaded.holdout_size == tiny_dataset.holdout_size
    assert len(loaded.train_episodes) == len(tiny_dataset.train_episodes)
    # the text round trip quantizes floats, so fingerprints are only
    # stable across loads of the same files, not across save/load
    assert loaded.fingerprint() == load_dataset(tmp_path).fingerprint()


def test_validate_dataset_passes_on_good_data(tiny_dataset, tmp_path):
    save_dataset(tiny_dataset.episodes, tmp_path)
    report = validate_dataset(tmp_path)
    assert report.ok, report.errors
    assert report.episode_count == 8
    assert "all checks passed" in report.summary()


def test_validate_dataset_missing_directory():
    report = validate_dataset("/nonexistent/dataset")
    assert not report.ok
    assert any("does not exist" in e for e in report.errors)


def test_validate_dataset_reports_missing_columns(tiny_dataset, tmp_path):
    save_dataset(tiny_dataset.episodes, tmp_path)
    victim = sorted(tmp_path.iterdir())[0] / "frames.csv"
    lines = victim.read_text().splitlines()
    header = lines[0].split(",")
    header.remove("strain")
    lines[0] = ",".join(header)
    victim.write_text("\n".join(lines) + "\n")
    report = validate_dataset(tmp_path)
    assert not report.ok
    assert any("missing columns" in e and "strain" in e for e in report.errors)


def test_validate_dataset_flags_missing_validation_split(tiny_dataset, tmp_path):
    keep = [ep for ep in tiny_dataset.episodes if ep.meta.repetition != 4]
    save_dataset(keep, tmp_path)
    report = validate_dataset(tmp_path)
    assert not report.ok
    assert any("no validation split" in e for e in report.errors)


def test_validate_dataset_flags_pressure_out_of_range(tiny_dataset, tmp_path):
    save_dataset(tiny_dataset.episodes, tmp_path)
    victim = sorted(tmp_path.iterdir())[0]
    ep = load_episode(victim)
    ep.input_pressure = ep.input_pressure + 100.0
    save_episode(ep, victim)
    report = validate_dataset(tmp_path)
    assert not report.ok
    assert any("input_pressure" in e for e in report.errors)


def test_validate_dataset_flags_bad_metadata(tiny_dataset, tmp_path):
    save_dataset(tiny_dataset.episodes, tmp_path)
    victim = sorted(tmp_path.iterdir())[0] / "meta.json"
    meta = json.loads(victim.read_text())
    meta["repetition"] = 9
    victim.write_text(json.dumps(meta))
    report = validate_dataset(tmp_path)
    assert not report.ok
