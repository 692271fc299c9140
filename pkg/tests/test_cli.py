"""End-to-end command line tests driven through main() in process."""

import json
from pathlib import Path

import numpy as np
import pytest

from softtouch.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, full_help_text, main

REPO_ROOT = Path(__file__).resolve().parents[1]

# Quick training knobs shared by the pipeline tests below.
TRAIN_ARGS = [
    "--epochs", "2",
    "--batch-size", "64",
    "--window", "5",
    "--train-stride", "50",
    "--eval-stride", "50",
]
# Threshold below the simulated mu of 0.6: ideal slip rides the Coulomb
# limit at exactly mu and would never cross a threshold above it.
DETECT_ARGS = ["--mu-threshold", "0.58", "--band", "0.01"]


@pytest.fixture(scope="module")
def sim_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "sim"
    code = main(["simulate", "--preset", "tiny", "--out", str(out)])
    assert code == EXIT_OK
    return out


@pytest.fixture(scope="module")
def train_dir(tmp_path_factory, sim_dir):
    out = tmp_path_factory.mktemp("cli") / "train"
    code = main(
        ["train", "--dataset", str(sim_dir), "--out", str(out), "--hidden", "4"]
        + TRAIN_ARGS
    )
    assert code == EXIT_OK
    return out


def test_help_reference_is_current():
    # docs/cli_help.txt is generated from the parsers; regenerating it must
    # be a no-op, otherwise the checked-in reference went stale.
    reference = (REPO_ROOT / "docs" / "cli_help.txt").read_text()
    assert full_help_text() == reference


def test_help_and_version_exit_zero(capsys):
    assert main(["--help"]) == EXIT_OK
    assert "simulate" in capsys.readouterr().out
    assert main(["--version"]) == EXIT_OK
    assert capsys.readouterr().out.startswith("softtouch ")


def test_no_subcommand_prints_help(capsys):
    assert main([]) == EXIT_USAGE
    assert "COMMAND" in capsys.readouterr().out


def test_usage_errors_exit_one(capsys):
    assert main(["simulate", "--preset", "bogus", "--out", "/tmp/x"]) == EXIT_USAGE
    assert main(["simulate"]) == EXIT_USAGE  # --out is required
    assert main(["--not-a-flag"]) == EXIT_USAGE
    capsys.readouterr()


def test_missing_input_exits_two(tmp_path, capsys):
    code = main(
        ["detect", "--input", str(tmp_path / "missing.csv"), "--out", str(tmp_path)]
    )
    assert code == EXIT_DATA
    assert "missing.csv" in capsys.readouterr().err


def test_validate_missing_dataset_exits_two(tmp_path, capsys):
    assert main(["validate", "--dataset", str(tmp_path / "none")]) == EXIT_DATA
    capsys.readouterr()


def test_unknown_log_level_exits_two(tmp_path, capsys):
    code = main(
        ["validate", "--dataset", str(tmp_path), "--log", "chatty"]
    )
    assert code == EXIT_DATA
    assert "unknown log level" in capsys.readouterr().err


def test_simulate_outputs(sim_dir):
    assert (sim_dir / "resolved_config").exists()
    resolved = (sim_dir / "resolved_config").read_text()
    assert resolved.splitlines()[0] == "[simulate]"
    assert "preset = tiny" in resolved
    meta = json.loads((sim_dir / "dataset.json").read_text())
    assert meta["episodes"] == 8
    assert meta["train"] == 3
    assert meta["validation"] == 1
    assert meta["holdout"] == 4
    assert len(meta["fingerprint"]) == 64
    episode_dirs = sorted(p for p in (sim_dir / "episodes").iterdir() if p.is_dir())
    assert len(episode_dirs) == 8
    assert (episode_dirs[0] / "frames.csv").exists()
    assert (episode_dirs[0] / "meta.json").exists()


def test_validate_accepts_simulated_dataset(sim_dir, capsys):
    assert main(["validate", "--dataset", str(sim_dir)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "episodes: 8" in out
    assert "all checks passed" in out


def test_train_outputs(train_dir):
    assert (train_dir / "resolved_config").exists()
    assert (train_dir / "weights.json").exists()
    history = (train_dir / "history.csv").read_text().splitlines()
    assert history[0] == "epoch,train_rmse,val_rmse"
    assert len(history) == 3  # header + 2 epochs
    metrics = json.loads((train_dir / "metrics.json").read_text())
    assert metrics["arch"] == "gru"
    assert metrics["rmse_pooled"] > 0
    assert "wall_time" not in metrics  # timestamps would break reruns


def test_eval_outputs(sim_dir, train_dir, tmp_path, capsys):
    out = tmp_path / "eval"
    code = main(
        [
            "eval",
            "--weights", str(train_dir / "weights.json"),
            "--dataset", str(sim_dir),
            "--out", str(out),
            "--eval-stride", "50",
        ]
    )
    assert code == EXIT_OK
    text = (out / "by_object.csv").read_text()
    assert "untrained" in text and "convex" in text
    assert "untrained" in capsys.readouterr().out


def test_detect_ground_truth(sim_dir, tmp_path, capsys):
    frames = sorted((sim_dir / "episodes").glob("*/frames.csv"))[0]
    out = tmp_path / "detect"
    code = main(
        ["detect", "--input", str(frames), "--out", str(out)] + DETECT_ARGS
    )
    assert code == EXIT_OK
    states = (out / "states.csv").read_text().splitlines()
    assert states[0] == "frame,t,state,f_n,f_f,ratio"
    assert len(states) == 1901  # header + one row per frame
    events = [
        json.loads(line)
        for line in (out / "events.jsonl").read_text().splitlines()
    ]
    kinds = [e["kind"] for e in events]
    assert "contact_onset" in kinds
    assert "slip_onset" in kinds
    assert "release" in kinds
    assert "classified 1900 frames" in capsys.readouterr().out
    # Pre-contact rows have an empty ratio column.
    first = states[1].split(",")
    assert first[2] == "noncontact" and first[5] == ""


def test_detect_with_weights(sim_dir, train_dir, tmp_path):
    frames = sorted((sim_dir / "episodes").glob("*/frames.csv"))[0]
    out = tmp_path / "detect_model"
    code = main(
        [
            "detect",
            "--input", str(frames),
            "--weights", str(train_dir / "weights.json"),
            "--out", str(out),
        ]
        + DETECT_ARGS
    )
    assert code == EXIT_OK
    assert len((out / "states.csv").read_text().splitlines()) == 1901


def test_replay_ground_truth(tmp_path, capsys):
    out = tmp_path / "replay"
    code = main(
        [
            "replay",
            "--scenario", "slip_test",
            "--out", str(out),
            "--no-noise",
        ]
        + DETECT_ARGS
    )
    assert code == EXIT_OK
    rep = json.loads((out / "report.json").read_text())
    assert rep["scenario"] == "slip_test"
    assert rep["insertion"] is None
    assert rep["threshold"] is None
    assert rep["slip_timing_error_frames"] is not None
    assert "threshold n/a" in capsys.readouterr().out


def test_replay_overpush_fixed_threshold(tmp_path):
    out = tmp_path / "replay_op"
    code = main(
        [
            "replay",
            "--scenario", "plug_overpush",
            "--threshold", "1.0",
            "--out", str(out),
            "--no-noise",
        ]
        + DETECT_ARGS
    )
    assert code == EXIT_OK
    rep = json.loads((out / "report.json").read_text())
    assert rep["threshold"] == 1.0
    assert len(rep["excursion_events"]) >= 1


def test_report_subcommand(tmp_path, capsys):
    from softtouch.experiment import ResultRow, write_rows_csv

    rows = [
        ResultRow(
            arch="gru", layers=1, hidden=5, feature_set="t7", object_group="all",
            rmse_fx=0.1, rmse_fy=0.1, rmse_fz=0.1, rmse_pooled=0.1,
            relative_rmse=None, seed=0, wall_time=1.0, n_samples=10,
        )
    ]
    results = tmp_path / "results.csv"
    write_rows_csv(rows, results)
    out = tmp_path / "report"
    assert main(["report", "--results", str(results), "--out", str(out)]) == EXIT_OK
    summary = json.loads((out / "summary.json").read_text())
    assert summary["best_cell"]["arch"] == "gru"
    assert "1 rows" in capsys.readouterr().out


def test_config_file_sets_defaults_and_flags_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("[global]\nseed = 3\n\n[simulate]\npreset = tiny\nmu = 0.7\n")
    out = tmp_path / "sim_cfg"
    code = main(
        [
            "simulate",
            "--config", str(cfg),
            "--out", str(out),
            "--mu", "0.8",  # beats the config file's 0.7
            "--no-noise",
        ]
    )
    assert code == EXIT_OK
    resolved = (out / "resolved_config").read_text()
    assert "preset = tiny" in resolved  # from the config file
    assert "seed = 3" in resolved  # from [global]
    assert "mu = 0.8" in resolved  # flag override wins


def test_config_file_unknown_key_exits_one(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("[simulate]\npresett = tiny\n")
    code = main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "x")])
    assert code == EXIT_USAGE
    assert "unknown config key: presett" in capsys.readouterr().err


def test_config_file_missing_exits_two(tmp_path, capsys):
    code = main(
        [
            "simulate",
            "--config", str(tmp_path / "none.cfg"),
            "--out", str(tmp_path / "x"),
        ]
    )
    assert code == EXIT_DATA
    capsys.readouterr()


def test_detect_states_match_episode_forces(sim_dir, tmp_path):
    # The f_n column of states.csv must reproduce hypot(fy, fz) of the
    # episode's ground-truth force columns.
    frames = sorted((sim_dir / "episodes").glob("*/frames.csv"))[0]
    out = tmp_path / "detect_check"
    assert main(["detect", "--input", str(frames), "--out", str(out)]) == EXIT_OK
    import pandas as pd

    states = pd.read_csv(out / "states.csv")
    source = pd.read_csv(frames)
    f_n = np.hypot(source["fy"], source["fz"])
    assert np.allclose(states["f_n"], f_n, atol=1e-9)
    assert np.allclose(states["f_f"], source["fx"].abs(), atol=1e-9)
