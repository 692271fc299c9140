"""Command line entry points for simulation, training and detection.

Every subcommand that produces files takes ``--out`` and first writes the
fully resolved options to ``<out>/resolved_config``, so any run can be
reproduced from its output directory alone.  Simulation and training
outputs contain no timestamps: the same command produces byte-identical
files on every run.

Exit codes: 0 success, 1 usage error, 2 data or validation error,
3 internal error.  Verbosity comes from ``--log`` or the SOFTTOUCH_LOG
environment variable.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .config import (
    apply_config_defaults,
    load_config,
    section_for,
    write_resolved_config,
)
from .contact import (
    ContactStateConfig,
    ReplayConfig,
    classify_stream,
    estimate_forces_from_sensors,
    replay_scenario,
)
from .core import DEFAULT_CONTACT_EPS_N
from .dataset_io import (
    Dataset,
    load_dataset,
    load_frames_csv,
    save_dataset,
    validate_dataset,
)
from .experiment import (
    DEFAULT_ARCHS,
    DEFAULT_HIDDEN_VALUES,
    DEFAULT_LAYER_VALUES,
    GridCell,
    GridSpec,
    HarnessConfig,
    _WindowCache,
    ablate_features,
    best_cell,
    eval_by_object,
    fit_dataset_scaler,
    read_rows_csv,
    report,
    run_grid,
    train_cell,
    write_rows_csv,
)
from .neural.models import Arch, ModelSpec, load_weights
from .neural.models import save_weights as save_model_weights
from .neural.training import TrainConfig
from .preprocess import FeatureSet
from .simulate.scenarios import Scenario
from .simulate.sweep import SWEEP_PRESETS, generate_dataset

log = logging.getLogger("softtouch.cli")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3

_HELP_WIDTH = 100  # pinned so the generated help reference is stable


class DataError(Exception):
    """Bad input data or failed validation; maps to exit code 2."""


def _formatter(prog: str) -> argparse.HelpFormatter:
    return argparse.HelpFormatter(prog, width=_HELP_WIDTH, max_help_position=30)


def _csv_strings(raw: str) -> tuple[str, ...]:
    items = tuple(s.strip() for s in raw.split(",") if s.strip())
    if not items:
        raise argparse.ArgumentTypeError("empty list")
    return items


def _csv_ints(raw: str) -> tuple[int, ...]:
    return tuple(int(s) for s in _csv_strings(raw))


def _add_common(p: argparse.ArgumentParser, seed: bool = True) -> None:
    p.add_argument(
        "--config",
        type=Path,
        default=None,
        help="config file; its [global] and subcommand sections set defaults, flags override",
    )
    p.add_argument(
        "--log",
        default=None,
        metavar="LEVEL",
        help="log level (debug, info, warning, error); defaults to $SOFTTOUCH_LOG",
    )
    if seed:
        p.add_argument("--seed", type=int, default=0, help="master seed for all randomness")


def _add_out(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", type=Path, required=True, help="output directory")


def _add_train_protocol(p: argparse.ArgumentParser) -> None:
    p.add_argument("--epochs", type=int, default=50, help="training epochs")
    p.add_argument("--batch-size", type=int, default=32, help="minibatch size")
    p.add_argument("--lr", type=float, default=1e-3, help="Adam learning rate")


def _add_harness(p: argparse.ArgumentParser) -> None:
    p.add_argument("--window", type=int, default=20, help="window length for recurrent models")
    p.add_argument("--mlp-window", type=int, default=1, help="window length for the MLP")
    p.add_argument(
        "--train-stride",
        type=int,
        default=1,
        help="subsample training window starts (1 = every frame); runtime knob only",
    )
    p.add_argument(
        "--eval-stride", type=int, default=1, help="subsample evaluation window starts"
    )


def _add_contact_options(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--mu-threshold", type=float, default=0.6, help="friction ratio threshold for slip"
    )
    p.add_argument(
        "--band",
        type=float,
        default=0.05,
        help="hysteresis half-width around the slip threshold",
    )
    p.add_argument(
        "--contact-eps",
        type=float,
        default=DEFAULT_CONTACT_EPS_N,
        help="normal force below which the finger counts as out of contact (N)",
    )
    p.add_argument(
        "--min-dwell",
        type=int,
        default=5,
        help="frames a new state must persist before it commits",
    )


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(
        prog="softtouch",
        description="Simulate a soft gripper finger, train force estimators, detect slip.",
        formatter_class=_formatter,
    )
    parser.add_argument("--version", action="version", version=f"softtouch {__version__}")
    subs = parser.add_subparsers(dest="command", metavar="COMMAND")
    registry: dict[str, argparse.ArgumentParser] = {}

    def sub(name: str, help_text: str) -> argparse.ArgumentParser:
        p = subs.add_parser(name, help=help_text, formatter_class=_formatter)
        registry[name] = p
        return p

    p = sub("simulate", "generate a grasp episode dataset")
    _add_common(p)
    _add_out(p)
    p.add_argument(
        "--preset",
        choices=sorted(SWEEP_PRESETS),
        default="default",
        help="sweep preset (number of objects, pressures and offsets)",
    )
    p.add_argument("--mu", type=float, default=0.6, help="friction coefficient of every grasp")
    p.add_argument(
        "--no-noise", action="store_true", help="disable the sensor corruption stage"
    )
    p.set_defaults(func=cmd_simulate)

    p = sub("train", "train one force estimation model")
    _add_common(p)
    _add_out(p)
    p.add_argument("--dataset", type=Path, required=True, help="dataset directory")
    p.add_argument(
        "--arch", choices=[a.value for a in Arch], default="gru", help="model architecture"
    )
    p.add_argument("--layers", type=int, default=1, help="stacked layers")
    p.add_argument("--hidden", type=int, default=10, help="hidden units per layer")
    p.add_argument(
        "--features",
        choices=[f.value for f in FeatureSet],
        default="t7",
        help="input feature set",
    )
    _add_train_protocol(p)
    _add_harness(p)
    p.set_defaults(func=cmd_train)

    p = sub("grid", "train a full architecture grid")
    _add_common(p)
    _add_out(p)
    p.add_argument("--dataset", type=Path, required=True, help="dataset directory")
    p.add_argument(
        "--archs",
        type=_csv_strings,
        default=tuple(a.value for a in DEFAULT_ARCHS),
        help="comma list of architectures",
    )
    p.add_argument(
        "--layer-values",
        type=_csv_ints,
        default=DEFAULT_LAYER_VALUES,
        help="comma list of layer counts",
    )
    p.add_argument(
        "--hidden-values",
        type=_csv_ints,
        default=DEFAULT_HIDDEN_VALUES,
        help="comma list of hidden sizes",
    )
    p.add_argument(
        "--feature-sets", type=_csv_strings, default=("t7",), help="comma list of feature sets"
    )
    p.add_argument("--seeds", type=_csv_ints, default=(0,), help="comma list of seeds")
    p.add_argument(
        "--ledger",
        type=Path,
        default=None,
        help="run ledger directory (default <out>/ledger); finished cells are not retrained",
    )
    p.add_argument("--jobs", type=int, default=1, help="parallel training jobs")
    _add_train_protocol(p)
    _add_harness(p)
    p.set_defaults(func=cmd_grid)

    p = sub("ablate", "retrain one model across input feature sets")
    _add_common(p)
    _add_out(p)
    p.add_argument("--dataset", type=Path, required=True, help="dataset directory")
    p.add_argument(
        "--arch", choices=[a.value for a in Arch], default="gru", help="model architecture"
    )
    p.add_argument("--layers", type=int, default=1, help="stacked layers")
    p.add_argument("--hidden", type=int, default=10, help="hidden units per layer")
    p.add_argument(
        "--feature-sets",
        type=_csv_strings,
        default=tuple(f.value for f in FeatureSet),
        help="comma list of feature sets to compare",
    )
    p.add_argument("--seeds", type=_csv_ints, default=(0,), help="comma list of seeds")
    p.add_argument(
        "--ledger", type=Path, default=None, help="run ledger directory (default <out>/ledger)"
    )
    _add_train_protocol(p)
    _add_harness(p)
    p.set_defaults(func=cmd_ablate)

    p = sub("eval", "evaluate trained weights per object group")
    _add_common(p, seed=False)
    _add_out(p)
    p.add_argument("--weights", type=Path, required=True, help="weights JSON from train")
    p.add_argument("--dataset", type=Path, required=True, help="dataset directory")
    p.add_argument(
        "--eval-stride", type=int, default=1, help="subsample evaluation window starts"
    )
    p.set_defaults(func=cmd_eval)

    p = sub("detect", "classify contact states on a recorded frame stream")
    _add_common(p, seed=False)
    _add_out(p)
    p.add_argument("--input", type=Path, required=True, help="frames.csv to classify")
    p.add_argument(
        "--weights",
        type=Path,
        default=None,
        help="weights JSON; omitted = classify the ground-truth force columns",
    )
    _add_contact_options(p)
    p.set_defaults(func=cmd_detect)

    p = sub("replay", "run an insertion or slip scenario through the detector")
    _add_common(p)
    _add_out(p)
    p.add_argument(
        "--scenario",
        choices=[s.value for s in Scenario],
        required=True,
        help="scenario to simulate",
    )
    p.add_argument(
        "--weights",
        type=Path,
        default=None,
        help="weights JSON; omitted = replay on ground-truth forces",
    )
    p.add_argument(
        "--threshold",
        type=float,
        default=None,
        help="excursion threshold in N; omitted = calibrate from success runs",
    )
    p.add_argument(
        "--smooth", type=int, default=15, help="moving-average width for the excursion trace"
    )
    p.add_argument("--no-noise", action="store_true", help="simulate without sensor noise")
    _add_contact_options(p)
    p.set_defaults(func=cmd_replay)

    p = sub("report", "summarize grid or ablation results")
    _add_common(p, seed=False)
    _add_out(p)
    p.add_argument("--results", type=Path, required=True, help="results CSV from grid/ablate")
    p.set_defaults(func=cmd_report)

    p = sub("validate", "check a dataset directory for schema and split problems")
    _add_common(p, seed=False)
    p.add_argument("--dataset", type=Path, required=True, help="dataset directory")
    p.set_defaults(func=cmd_validate)

    return parser, registry


def full_help_text() -> str:
    """Help of the main parser and every subcommand, concatenated.

    A documentation test regenerates this text and diffs it against the
    checked-in reference, so the reference never drifts from the code.
    """
    parser, registry = build_parser()
    parts = [parser.format_help()]
    for name in registry:
        parts.append(f"{'=' * 72}\n{registry[name].format_help()}")
    return "\n".join(parts)


def _episodes_root(dataset_dir: Path) -> Path:
    # simulate writes <out>/episodes; accept either that directory or <out>.
    nested = Path(dataset_dir) / "episodes"
    return nested if nested.is_dir() else Path(dataset_dir)


def _load_dataset_arg(dataset_dir: Path) -> Dataset:
    return load_dataset(_episodes_root(dataset_dir))


def _harness_from_args(args: argparse.Namespace) -> HarnessConfig:
    return HarnessConfig(
        window_length=args.window,
        mlp_window_length=args.mlp_window,
        train_stride=args.train_stride,
        eval_stride=args.eval_stride,
    )


def _train_config_from_args(args: argparse.Namespace) -> TrainConfig:
    return TrainConfig(batch_size=args.batch_size, epochs=args.epochs, learning_rate=args.lr)


def _contact_config_from_args(args: argparse.Namespace) -> ContactStateConfig:
    return ContactStateConfig(
        mu_threshold=args.mu_threshold,
        contact_eps=args.contact_eps,
        ratio_hysteresis=args.band,
        min_dwell=args.min_dwell,
    )


def _write_json(path: Path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def cmd_simulate(args: argparse.Namespace) -> int:
    write_resolved_config(args.out, "simulate", args)
    config = SWEEP_PRESETS[args.preset](noise=not args.no_noise)
    config = replace(config, friction_mu=args.mu)
    log.info("simulating %d episodes (preset %s)", config.episode_count, args.preset)
    dataset = generate_dataset(config, args.seed)
    save_dataset(dataset.episodes, args.out / "episodes")
    _write_json(
        args.out / "dataset.json",
        {
            "episodes": len(dataset.episodes),
            "train": len(dataset.train_episodes),
            "validation": len(dataset.validation_episodes),
            "holdout": len(dataset.holdout_episodes),
            "fingerprint": dataset.fingerprint(),
        },
    )
    print(f"wrote {len(dataset.episodes)} episodes to {args.out / 'episodes'}")
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    write_resolved_config(args.out, "train", args)
    dataset = _load_dataset_arg(args.dataset)
    harness = _harness_from_args(args)
    cell = GridCell(
        arch=Arch(args.arch),
        layers=args.layers,
        hidden=args.hidden,
        feature_set=FeatureSet(args.features),
        seed=args.seed,
    )
    scaler = fit_dataset_scaler(dataset)
    cache = _WindowCache(dataset, scaler, harness)
    row, result = train_cell(cell, cache, _train_config_from_args(args))
    save_model_weights(result.best_weights, args.out / "weights.json")
    lines = ["epoch,train_rmse,val_rmse"]
    for i, (tr, va) in enumerate(
        zip(result.history.train_rmse, result.history.val_rmse), start=1
    ):
        lines.append(f"{i},{float(tr):.17g},{float(va):.17g}")
    (args.out / "history.csv").write_text("\n".join(lines) + "\n")
    metrics = row.to_dict()
    metrics.pop("wall_time")  # timestamps would break byte-identical reruns
    metrics.pop("relative_rmse")
    _write_json(args.out / "metrics.json", metrics)
    print(
        f"trained {cell.arch.value} layers={cell.layers} hidden={cell.hidden} "
        f"features={cell.feature_set.value}: val pooled RMSE {row.rmse_pooled:.6f} N "
        f"(best epoch {result.history.best_epoch + 1}/{args.epochs})"
    )
    return EXIT_OK


def cmd_grid(args: argparse.Namespace) -> int:
    write_resolved_config(args.out, "grid", args)
    dataset = _load_dataset_arg(args.dataset)
    grid = GridSpec(
        archs=tuple(Arch(a) for a in args.archs),
        layer_values=tuple(args.layer_values),
        hidden_values=tuple(args.hidden_values),
        feature_sets=tuple(FeatureSet(f) for f in args.feature_sets),
        seeds=tuple(args.seeds),
    )
    rows = run_grid(
        grid,
        dataset,
        config=_train_config_from_args(args),
        harness=_harness_from_args(args),
        ledger_dir=args.ledger if args.ledger is not None else args.out / "ledger",
        jobs=args.jobs,
    )
    if not rows:
        raise DataError("every grid cell failed; see the log")
    write_rows_csv(rows, args.out / "results.csv")
    best = best_cell(rows)
    print(
        f"{len(rows)}/{len(grid.cells())} cells finished; best "
        f"{best.arch} layers={best.layers} hidden={best.hidden} {best.feature_set} "
        f"seed={best.seed}: pooled RMSE {best.rmse_pooled:.6f} N"
    )
    return EXIT_OK


def cmd_ablate(args: argparse.Namespace) -> int:
    write_resolved_config(args.out, "ablate", args)
    dataset = _load_dataset_arg(args.dataset)
    spec = ModelSpec(
        arch=Arch(args.arch),
        layers=args.layers,
        hidden=args.hidden,
        in_dim=FeatureSet.T7.dim,  # per-cell in_dim adapts to each feature set
    )
    rows = ablate_features(
        spec,
        dataset,
        config=_train_config_from_args(args),
        harness=_harness_from_args(args),
        feature_sets=tuple(FeatureSet(f) for f in args.feature_sets),
        seeds=tuple(args.seeds),
        ledger_dir=args.ledger if args.ledger is not None else args.out / "ledger",
    )
    if not rows:
        raise DataError("every ablation cell failed; see the log")
    write_rows_csv(rows, args.out / "results.csv")
    for row in rows:
        print(
            f"{row.feature_set} seed={row.seed}: pooled RMSE {row.rmse_pooled:.6f} N "
            f"(relative {row.relative_rmse:.4f})"
        )
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    write_resolved_config(args.out, "eval", args)
    weights = load_weights(args.weights)
    dataset = _load_dataset_arg(args.dataset)
    rows = eval_by_object(weights, dataset, eval_stride=args.eval_stride)
    write_rows_csv(rows, args.out / "by_object.csv")
    for row in rows:
        print(
            f"{row.object_group}: pooled RMSE {row.rmse_pooled:.6f} N "
            f"({row.n_samples} windows)"
        )
    return EXIT_OK


def cmd_detect(args: argparse.Namespace) -> int:
    write_resolved_config(args.out, "detect", args)
    data = load_frames_csv(args.input)
    if args.weights is not None:
        weights = load_weights(args.weights)
        forces = estimate_forces_from_sensors(weights, data["sensors"])
    else:
        forces = data["forces"]
    cfg = _contact_config_from_args(args)
    states, events = classify_stream(forces, cfg)
    with (args.out / "events.jsonl").open("w") as fh:
        for event in events:
            fh.write(json.dumps(event.to_dict(), sort_keys=True) + "\n")
    lines = ["frame,t,state,f_n,f_f,ratio"]
    for i, state in enumerate(states):
        ratio = "" if state.ratio is None else f"{state.ratio:.12g}"
        lines.append(
            f"{i},{data['t'][i]:.12g},{state.kind.value},"
            f"{state.f_n:.12g},{state.f_f:.12g},{ratio}"
        )
    (args.out / "states.csv").write_text("\n".join(lines) + "\n")
    print(f"classified {len(states)} frames: {len(events)} events")
    for event in events:
        print(f"  {event.kind.value} at frame {event.frame} (t={event.t:.2f} s)")
    return EXIT_OK


def cmd_replay(args: argparse.Namespace) -> int:
    write_resolved_config(args.out, "replay", args)
    weights = load_weights(args.weights) if args.weights is not None else None
    cfg = ReplayConfig(
        contact=_contact_config_from_args(args),
        excursion_threshold=args.threshold,
        smooth_frames=args.smooth,
        noise=not args.no_noise,
        seed=args.seed,
    )
    rep = replay_scenario(Scenario(args.scenario), weights, cfg)
    _write_json(args.out / "report.json", rep.to_dict())
    thr = "n/a" if rep.threshold is None else f"{rep.threshold:.3f} N"
    print(
        f"{rep.scenario}: {len(rep.excursion_events)} excursion events, "
        f"peak deviation {rep.peak_deviation:.3f} N (threshold {thr})"
    )
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    write_resolved_config(args.out, "report", args)
    rows = read_rows_csv(args.results)
    if not rows:
        raise DataError(f"no result rows in {args.results}")
    summary = report(rows, args.out)
    best = summary["best_cell"]
    print(
        f"{summary['n_rows']} rows; best {best['arch']} layers={best['layers']} "
        f"hidden={best['hidden']} {best['feature_set']}: "
        f"pooled RMSE {best['rmse_pooled']:.6f} N"
    )
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    rep = validate_dataset(_episodes_root(args.dataset))
    print(rep.summary())
    return EXIT_OK if rep.ok else EXIT_DATA


def _configure_logging(args: argparse.Namespace) -> None:
    name = getattr(args, "log", None) or os.environ.get("SOFTTOUCH_LOG") or "warning"
    level = getattr(logging, name.upper(), None)
    if not isinstance(level, int):
        raise DataError(f"unknown log level: {name}")
    logging.basicConfig(
        level=level,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, registry = build_parser()

    # Install config-file values as defaults before the real parse so
    # explicit flags still override them.
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", type=Path, default=None)
    known, _ = pre.parse_known_args(argv)
    subcommand = next((a for a in argv if not a.startswith("-")), None)
    if known.config is not None and subcommand in registry:
        try:
            config = load_config(known.config)
            apply_config_defaults(registry[subcommand], section_for(config, subcommand))
        except FileNotFoundError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_DATA
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_USAGE

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors and 0 for --help/--version
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    if getattr(args, "func", None) is None:
        parser.print_help()
        return EXIT_USAGE

    try:
        _configure_logging(args)
        return int(args.func(args))
    except (DataError, FileNotFoundError, ValueError, AssertionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception:
        log.exception("internal error")
        print("internal error; rerun with --log debug for the traceback", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
