"""Strict TOML configuration: one table per configuration group.

Missing keys take the dataclass defaults. Unknown tables or keys, wrong value
types and out-of-range values raise :class:`ConfigError` naming the dotted key.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

from mapless_planner.async_runner import RunConfig
from mapless_planner.ddpg_agent import Hyperparams, NoiseConfig
from mapless_planner.eval_bench import EvalConfig
from mapless_planner.gp_baseline import GpConfig
from mapless_planner.sim2d import EpisodeConfig, LidarSpec, RewardConfig
from mapless_planner.utils import read_toml, tomllib, write_toml

logger = logging.getLogger(__name__)


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the dotted key path."""


@dataclass(frozen=True)
class Config:
    lidar: LidarSpec = field(default_factory=LidarSpec)
    reward: RewardConfig = field(default_factory=RewardConfig)
    episode: EpisodeConfig = field(default_factory=EpisodeConfig)
    agent: Hyperparams = field(default_factory=Hyperparams)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    run: RunConfig = field(default_factory=RunConfig)
    gp: GpConfig = field(default_factory=GpConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)


SECTIONS: dict[str, type] = {f.name: type(getattr(Config(), f.name)) for f in fields(Config)}


def _coerce(key: str, value: Any, default: Any) -> Any:
    """Check ``value`` against the type of the field's default."""
    if isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, int):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif isinstance(default, float):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        value = float(value) if ok else value
    else:
        ok = isinstance(value, type(default))
    if not ok:
        raise ConfigError(f"{key}: expected {type(default).__name__}, got {type(value).__name__}")
    return value


def _build_section(name: str, table: Any) -> Any:
    cls = SECTIONS[name]
    if not isinstance(table, dict):
        raise ConfigError(f"{name}: expected a table")
    defaults = cls()
    known = {f.name for f in fields(cls)}
    values = {}
    for key, value in table.items():
        if key not in known:
            raise ConfigError(f"{name}.{key}: unknown key")
        values[key] = _coerce(f"{name}.{key}", value, getattr(defaults, key))
    try:
        return replace(defaults, **values)
    except ValueError as exc:
        raise ConfigError(f"{name}.{exc}") from exc


def config_from_dict(data: dict[str, Any]) -> Config:
    """Resolve a parsed TOML document into a :class:`Config`."""
    for name in data:
        if name not in SECTIONS:
            raise ConfigError(f"{name}: unknown table")
    cfg = Config(**{name: _build_section(name, table) for name, table in data.items()})
    if cfg.reward.c_o < cfg.lidar.min_range:
        raise ConfigError("reward.c_o must be >= lidar.min_range")
    return cfg


def parse_config(path: str | Path | None = None) -> Config:
    """Parse a configuration file; ``None`` gives all defaults.

    Raises:
        ConfigError: Unreadable or malformed file, unknown key, bad type or
            out-of-range value
    """
    if path is None:
        return Config()
    try:
        data = read_toml(path)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    cfg = config_from_dict(data)
    logger.debug("Parsed config from %s", path)
    return cfg


def config_to_dict(cfg: Config) -> dict[str, dict[str, Any]]:
    """Every key of every table, defaults included."""
    return {f.name: asdict(getattr(cfg, f.name)) for f in fields(cfg)}


def echo_config(cfg: Config, filename: str | Path) -> Path:
    """Write the fully resolved configuration as TOML."""
    filepath = Path(filename)
    if filepath.suffix.lower() != ".toml":
        filepath = filepath.with_suffix(".toml")
    return write_toml(config_to_dict(cfg), filepath)
