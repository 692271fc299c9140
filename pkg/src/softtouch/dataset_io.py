"""Episode persistence: one directory per episode with meta.json + frames.csv.

frames.csv columns are fixed:
    t,input_pressure,strain,taxel_00..taxel_11,fx,fy,fz,phase,is_slipping
Floats are written with 12 significant digits, phases by name, is_slipping
as 0/1.  The writer is deterministic: identical episodes produce byte
identical files.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .core import (
    DT,
    TAXELS_PER_FINGER,
    ConditionMeta,
    Episode,
    ObjectShape,
    Phase,
)

FRAME_COLUMNS = (
    "t",
    "input_pressure",
    "strain",
    *[f"taxel_{j:02d}" for j in range(TAXELS_PER_FINGER)],
    "fx",
    "fy",
    "fz",
    "phase",
    "is_slipping",
)

_HEADER = ",".join(FRAME_COLUMNS)
_N_FLOAT_COLS = 3 + TAXELS_PER_FINGER + 3  # t, pressure, strain, taxels, forces
_ROW_FMT = ",".join(["%.12g"] * _N_FLOAT_COLS) + ",%s,%d\n"


def episode_dir_name(meta: ConditionMeta, index: int, finger: int | None = None) -> str:
    """Stable, filesystem-safe directory name for one episode."""
    name = (
        f"ep{index:04d}_{meta.object_shape.value}{meta.object_size:g}"
        f"_p{meta.finger_pressure:g}_y{meta.robot_offset_y:g}_z{meta.robot_offset_z:g}"
        f"_r{meta.repetition}"
    ).replace("-", "m").replace(".", "d")
    if finger is not None:
        name += f"_f{finger}"
    return name


def save_episode(episode: Episode, directory: Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    meta_path = directory / "meta.json"
    meta_path.write_text(
        json.dumps(episode.meta.to_dict(), indent=2, sort_keys=True) + "\n"
    )
    rows = []
    phases = [Phase(int(p)).label for p in episode.phases]
    for i in range(len(episode)):
        values = (
            episode.t[i],
            episode.input_pressure[i],
            episode.strain[i],
            *episode.taxels[i],
            *episode.forces[i],
            phases[i],
            int(episode.slipping[i]),
        )
        rows.append(_ROW_FMT % values)
    (directory / "frames.csv").write_text(_HEADER + "\n" + "".join(rows))


def load_episode(directory: Path, holdout: bool = False) -> Episode:
    directory = Path(directory)
    meta = ConditionMeta.from_dict(json.loads((directory / "meta.json").read_text()))
    df = pd.read_csv(directory / "frames.csv")
    if tuple(df.columns) != FRAME_COLUMNS:
        raise ValueError(
            f"unexpected frames.csv columns in {directory}: {list(df.columns)}"
        )
    taxel_cols = [f"taxel_{j:02d}" for j in range(TAXELS_PER_FINGER)]
    episode = Episode(
        meta=meta,
        t=df["t"].to_numpy(dtype=np.float64),
        input_pressure=df["input_pressure"].to_numpy(dtype=np.float64),
        strain=df["strain"].to_numpy(dtype=np.float64),
        taxels=df[taxel_cols].to_numpy(dtype=np.float64),
        forces=df[["fx", "fy", "fz"]].to_numpy(dtype=np.float64),
        phases=np.array([Phase.from_label(p) for p in df["phase"]], dtype=np.int64),
        slipping=df["is_slipping"].to_numpy(dtype=np.int64).astype(bool),
        holdout=holdout,
    )
    episode.validate()
    return episode


def load_frames_csv(path: Path) -> dict[str, np.ndarray]:
    """Read a bare frames.csv (no meta.json needed) into column arrays.

    Returns t, sensors (n, 14) in canonical channel order, forces (n, 3),
    phases and slipping.  Used by the detector, which only needs frames.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"input frames file does not exist: {path}")
    df = pd.read_csv(path)
    if tuple(df.columns) != FRAME_COLUMNS:
        raise ValueError(f"unexpected frames.csv columns in {path}: {list(df.columns)}")
    sensor_cols = ["input_pressure", "strain"] + [
        f"taxel_{j:02d}" for j in range(TAXELS_PER_FINGER)
    ]
    return {
        "t": df["t"].to_numpy(dtype=np.float64),
        "sensors": df[sensor_cols].to_numpy(dtype=np.float64),
        "forces": df[["fx", "fy", "fz"]].to_numpy(dtype=np.float64),
        "phases": np.array([Phase.from_label(p) for p in df["phase"]], dtype=np.int64),
        "slipping": df["is_slipping"].to_numpy(dtype=np.int64).astype(bool),
    }


def episode_dirs(dataset_dir: Path) -> list[Path]:
    dataset_dir = Path(dataset_dir)
    return sorted(p for p in dataset_dir.iterdir() if (p / "meta.json").exists())


@dataclass
class Dataset:
    """All episodes of a simulated recording session, with split flags."""

    episodes: list[Episode]
    holdout_size: float | None = None  # object_size marking the untrained object

    def __post_init__(self):
        if self.holdout_size is None:
            self.holdout_size = infer_holdout_size(self.episodes)
        for ep in self.episodes:
            ep.holdout = self._is_holdout(ep.meta)

    def _is_holdout(self, meta: ConditionMeta) -> bool:
        return (
            self.holdout_size is not None
            and meta.object_shape == ObjectShape.CONVEX
            and meta.object_size == self.holdout_size
        )

    @property
    def train_episodes(self) -> list[Episode]:
        return [
            ep for ep in self.episodes if not ep.holdout and ep.meta.is_train_repetition
        ]

    @property
    def validation_episodes(self) -> list[Episode]:
        """Repetition-4 episodes of trained objects."""
        return [
            ep
            for ep in self.episodes
            if not ep.holdout and not ep.meta.is_train_repetition
        ]

    @property
    def holdout_episodes(self) -> list[Episode]:
        return [ep for ep in self.episodes if ep.holdout]

    def fingerprint(self) -> str:
        """SHA-256 over episode metadata and force labels (split-relevant content)."""
        h = hashlib.sha256()
        for ep in sorted(self.episodes, key=lambda e: json.dumps(e.meta.to_dict(), sort_keys=True)):
            h.update(json.dumps(ep.meta.to_dict(), sort_keys=True).encode())
            h.update(np.ascontiguousarray(ep.forces).tobytes())
        return h.hexdigest()


def infer_holdout_size(episodes: list[Episode]) -> float | None:
    """The untrained object is the smallest convex size present."""
    sizes = {
        ep.meta.object_size
        for ep in episodes
        if ep.meta.object_shape == ObjectShape.CONVEX
    }
    if len(sizes) < 2:
        return None  # no size range to hold out from
    return min(sizes)


def save_dataset(episodes: list[Episode], out_dir: Path) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for i, ep in enumerate(episodes):
        save_episode(ep, out_dir / episode_dir_name(ep.meta, i))


def load_dataset(dataset_dir: Path) -> Dataset:
    dirs = episode_dirs(dataset_dir)
    if not dirs:
        raise FileNotFoundError(f"no episodes found under {dataset_dir}")
    episodes = [load_episode(d) for d in dirs]
    return Dataset(episodes=episodes)


@dataclass
class ValidationReport:
    episode_count: int = 0
    frame_count: int = 0
    train_count: int = 0
    validation_count: int = 0
    holdout_count: int = 0
    errors: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def summary(self) -> str:
        lines = [
            f"episodes: {self.episode_count} ({self.train_count} train, "
            f"{self.validation_count} validation, {self.holdout_count} holdout)",
            f"frames: {self.frame_count}",
        ]
        if self.errors:
            lines.append(f"errors: {len(self.errors)}")
            lines.extend(f"  - {e}" for e in self.errors)
        else:
            lines.append("all checks passed")
        return "\n".join(lines)


def validate_dataset(dataset_dir: Path) -> ValidationReport:
    """Schema, timing and split checks over every episode directory."""
    report = ValidationReport()
    dataset_dir = Path(dataset_dir)
    if not dataset_dir.exists():
        report.errors.append(f"dataset directory does not exist: {dataset_dir}")
        return report
    dirs = episode_dirs(dataset_dir)
    if not dirs:
        report.errors.append(f"no episode directories under {dataset_dir}")
        return report

    episodes = []
    for d in dirs:
        frames_csv = d / "frames.csv"
        if not frames_csv.exists():
            report.errors.append(f"{d.name}: missing frames.csv")
            continue
        header = frames_csv.open().readline().strip()
        if header != _HEADER:
            got = header.split(",")
            missing = [c for c in FRAME_COLUMNS if c not in got]
            extra = [c for c in got if c not in FRAME_COLUMNS]
            detail = []
            if missing:
                detail.append(f"missing columns {missing}")
            if extra:
                detail.append(f"unexpected columns {extra}")
            report.errors.append(
                f"{d.name}: bad frames.csv header ({'; '.join(detail) or 'column order'})"
            )
            continue
        try:
            ep = load_episode(d)
        except Exception as exc:  # surface schema violations per episode
            report.errors.append(f"{d.name}: {exc}")
            continue
        if np.any(ep.input_pressure < 0) or np.any(ep.input_pressure > 60 + 1e-9):
            report.errors.append(f"{d.name}: input_pressure outside [0, 60] kPa")
        if len(ep) >= 2 and np.max(np.abs(np.diff(ep.t) - DT)) > 1e-9:
            report.errors.append(f"{d.name}: timestamps not uniform at {DT} s")
        episodes.append(ep)
        report.frame_count += len(ep)

    report.episode_count = len(episodes)
    if episodes:
        ds = Dataset(episodes=episodes)
        report.train_count = len(ds.train_episodes)
        report.validation_count = len(ds.validation_episodes)
        report.holdout_count = len(ds.holdout_episodes)
        reps = {ep.meta.repetition for ep in episodes}
        if 4 not in reps:
            report.errors.append("no validation split: no repetition-4 episodes")
        if not ds.train_episodes:
            report.errors.append("no training episodes (repetitions 1-3)")
    return report
