"""Plain-text run configuration: INI-style sections of key = value lines.

A config file holds one section per subcommand plus an optional [global]
section; command-line flags override file values.  The fully resolved
options of every run are echoed back in the same format, so a run can be
reproduced from its resolved_config alone.
"""

from __future__ import annotations

import argparse
import configparser
from pathlib import Path

RESOLVED_CONFIG_NAME = "resolved_config"
GLOBAL_SECTION = "global"

_BOOL_STRINGS = {
    "true": True,
    "false": False,
    "1": True,
    "0": False,
    "yes": True,
    "no": False,
}


def parse_bool(raw: str) -> bool:
    try:
        return _BOOL_STRINGS[raw.strip().lower()]
    except KeyError:
        raise ValueError(f"not a boolean: {raw!r}") from None


def load_config(path: Path) -> dict[str, dict[str, str]]:
    """Sections mapped to raw string values; keys are option names."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config file does not exist: {path}")
    parser = configparser.ConfigParser()
    parser.read_string(path.read_text(), source=str(path))
    return {name: dict(parser[name]) for name in parser.sections()}


def section_for(config: dict[str, dict[str, str]], subcommand: str) -> dict[str, str]:
    """Global section values overlaid by the subcommand's own section."""
    merged = dict(config.get(GLOBAL_SECTION, {}))
    merged.update(config.get(subcommand, {}))
    return merged


def apply_config_defaults(parser: argparse.ArgumentParser, values: dict[str, str]) -> None:
    """Install file values as parser defaults so flags still override.

    Values are coerced with each option's declared type; unknown keys are
    rejected so a typo in a config file cannot be silently ignored.
    """
    by_dest = {}
    for action in parser._actions:
        option = action.option_strings[-1].lstrip("-") if action.option_strings else action.dest
        by_dest[option.replace("-", "_")] = action
        by_dest[action.dest] = action
    for key, raw in values.items():
        action = by_dest.get(key.replace("-", "_"))
        if action is None:
            raise ValueError(f"unknown config key: {key}")
        if isinstance(action.const, bool) or isinstance(action.default, bool):
            value = parse_bool(raw)
        elif action.type is not None:
            value = action.type(raw)
        else:
            value = raw
        parser.set_defaults(**{action.dest: value})


def format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (list, tuple)):
        return ",".join(format_value(v) for v in value)
    return str(value)


def write_resolved_config(
    out_dir: Path,
    subcommand: str,
    namespace: argparse.Namespace,
    exclude: tuple[str, ...] = ("config", "func", "command"),
) -> Path:
    """Echo the effective options, sorted, before any work happens."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = [f"[{subcommand}]"]
    for key in sorted(vars(namespace)):
        if key in exclude:
            continue
        value = getattr(namespace, key)
        if value is None:
            continue
        lines.append(f"{key.replace('_', '-')} = {format_value(value)}")
    path = out_dir / RESOLVED_CONFIG_NAME
    path.write_text("\n".join(lines) + "\n")
    return path
