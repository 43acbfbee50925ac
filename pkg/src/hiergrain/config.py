"""Simulation configuration, validation and the TOML config-file format."""

from __future__ import annotations

import dataclasses
import math
import sys
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    """Raised when a configuration violates one or more bounds.

    ``problems`` holds one message per violated bound.
    """

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass(frozen=True)
class SimulationConfig:
    pop_size: int = 2500
    num_labels: int = 6
    num_issues: int = 5
    num_choices: int = 5
    multi_issue_discourse: int = 20
    strength_of_influence: float = 20
    ignoring: bool = True
    prob_dropping_label: float = 0.001
    prob_adopting_label: float = 0.1
    init_strength_max: float = 3.0
    max_timesteps: int = 60000
    snapshot_interval: int = 200
    equilibrium_window: int = 1000
    seed: int = 0

    @property
    def issues_per_discourse(self) -> int:
        """Issues discussed in a same-label interaction (clamped to num_issues)."""
        return min(self.multi_issue_discourse, self.num_issues)

    def replace(self, **changes: Any) -> "SimulationConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


# Hyphenated file keys; run controls use the same style.
FILE_KEYS: dict[str, str] = {
    "pop-size": "pop_size",
    "num-labels": "num_labels",
    "num-issues": "num_issues",
    "num-choices": "num_choices",
    "multi-issue-discourse": "multi_issue_discourse",
    "strength-of-influence": "strength_of_influence",
    "ignoring": "ignoring",
    "prob-dropping-label": "prob_dropping_label",
    "prob-adopting-a-label": "prob_adopting_label",
    "init-strength-max": "init_strength_max",
    "max-timesteps": "max_timesteps",
    "snapshot-interval": "snapshot_interval",
    "equilibrium-window": "equilibrium_window",
    "seed": "seed",
}
FIELD_TO_KEY = {v: k for k, v in FILE_KEYS.items()}

_INT_FIELDS = {
    "pop_size", "num_labels", "num_issues", "num_choices", "multi_issue_discourse",
    "max_timesteps", "snapshot_interval", "equilibrium_window", "seed",
}
_REAL_FIELDS = {
    "strength_of_influence", "prob_dropping_label", "prob_adopting_label", "init_strength_max",
}


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _is_real(value: Any) -> bool:
    return (_is_int(value) or isinstance(value, float)) and math.isfinite(value)


def validate_config(raw: SimulationConfig) -> SimulationConfig:
    """Check every bound on ``raw`` and return it unchanged if valid.

    All violations are collected before raising, so the resulting
    :class:`ConfigError` names each offending field.
    """
    problems: list[str] = []
    for f in fields(raw):
        value = getattr(raw, f.name)
        if f.name in _INT_FIELDS and not _is_int(value):
            problems.append(f"{f.name}: expected an integer, got {value!r}")
        elif f.name in _REAL_FIELDS and not _is_real(value):
            problems.append(f"{f.name}: expected a finite real, got {value!r}")
        elif f.name == "ignoring" and not isinstance(value, bool):
            problems.append(f"ignoring: expected a boolean, got {value!r}")
    if problems:
        raise ConfigError(problems)

    for name in ("pop_size", "num_labels", "num_issues", "multi_issue_discourse",
                 "snapshot_interval", "equilibrium_window"):
        if getattr(raw, name) < 1:
            problems.append(f"{name}: must be >= 1, got {getattr(raw, name)}")
    if raw.num_choices < 2:
        problems.append(f"num_choices: must be >= 2 (no decision possible), got {raw.num_choices}")
    if raw.max_timesteps < 0:
        problems.append(f"max_timesteps: must be >= 0, got {raw.max_timesteps}")
    if raw.strength_of_influence <= 0:
        problems.append(f"strength_of_influence: must be > 0, got {raw.strength_of_influence}")
    if raw.init_strength_max < 0:
        problems.append(f"init_strength_max: must be >= 0, got {raw.init_strength_max}")
    for name in ("prob_dropping_label", "prob_adopting_label"):
        p = getattr(raw, name)
        if not 0.0 <= p <= 1.0:
            problems.append(f"{name}: probability out of range [0, 1], got {p}")
    if not 0 <= raw.seed < 2**64:
        problems.append(f"seed: must be an unsigned 64-bit integer, got {raw.seed}")
    if raw.max_timesteps > 0 and raw.snapshot_interval > raw.max_timesteps:
        problems.append(
            f"snapshot_interval ({raw.snapshot_interval}) exceeds max_timesteps ({raw.max_timesteps})"
        )
    if problems:
        raise ConfigError(problems)
    return raw


def config_from_mapping(data: dict[str, Any], base: SimulationConfig | None = None) -> SimulationConfig:
    """Build a config from file-style keys; unknown keys are an error."""
    unknown = sorted(k for k in data if k not in FILE_KEYS)
    if unknown:
        raise ConfigError([f"unknown key {k!r}" for k in unknown])
    values = {FILE_KEYS[k]: v for k, v in data.items()}
    base = base or SimulationConfig()
    return validate_config(dataclasses.replace(base, **values))


def config_to_mapping(config: SimulationConfig) -> dict[str, Any]:
    return {FIELD_TO_KEY[k]: v for k, v in config.to_dict().items()}


def read_toml(path: str | Path) -> dict[str, Any]:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([f"{path}: malformed file ({exc})"]) from exc


def load_config(path: str | Path) -> SimulationConfig:
    return config_from_mapping(read_toml(path))


def dump_config(config: SimulationConfig) -> str:
    """Render ``config`` in the flat key/value file format."""
    lines = []
    for key, value in config_to_mapping(config).items():
        if isinstance(value, bool):
            text = "true" if value else "false"
        else:
            text = repr(value)
        lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"
