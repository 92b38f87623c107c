"""Utility functions for mapless-planner."""

from __future__ import annotations

import math
import sys
from pathlib import Path
from typing import Any

import numpy as np
import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


def wrap_angle(angle: float) -> float:
    """Wrap an angle to (-pi, pi].

    Args:
        angle: Angle in radians

    Returns:
        Equivalent angle in the half-open interval (-pi, pi]
    """
    if -math.pi < angle <= math.pi:
        return angle
    wrapped = math.fmod(angle + math.pi, 2.0 * math.pi)
    if wrapped <= 0.0:
        wrapped += 2.0 * math.pi
    return wrapped - math.pi


def spawn_rngs(seed: int | np.random.SeedSequence, n: int) -> list[np.random.Generator]:
    """Derive ``n`` independent generators from one seed.

    Args:
        seed: Integer seed or an existing SeedSequence
        n: Number of generators to derive

    Returns:
        List of numpy Generators, one per independent stream
    """
    seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [np.random.default_rng(child) for child in seq.spawn(n)]


def as_vector(obs: Any) -> np.ndarray:
    """Convert an observation (Observation, sequence or array) to a float64 vector."""
    if hasattr(obs, "as_vector"):
        return obs.as_vector()
    return np.asarray(obs, dtype=np.float64).reshape(-1)


def read_toml(path: str | Path) -> dict[str, Any]:
    """Parse a TOML file into a dict."""
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def write_toml(data: dict[str, Any], path: str | Path) -> Path:
    """Write a dict as TOML, returning the path written."""
    filepath = Path(path)
    filepath.write_text(tomli_w.dumps(data), encoding="utf-8")
    return filepath
