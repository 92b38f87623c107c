"""2D navigation simulator: polygonal worlds, sparse lidar, unicycle kinematics, reward.

Worlds are axis-aligned rectangles ``[0, w] x [0, h]`` whose boundary acts as
walls, filled with simple polygonal obstacles. The robot only perceives them
through a handful of range beams.
"""

from __future__ import annotations

import json
import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from importlib.resources import files
from pathlib import Path
from typing import Any

import numpy as np

from mapless_planner.constants import (
    DEFAULT_C_D,
    DEFAULT_C_O,
    DEFAULT_C_R,
    DEFAULT_DT,
    DEFAULT_FOV_MAX,
    DEFAULT_FOV_MIN,
    DEFAULT_MAX_RANGE,
    DEFAULT_MAX_STEPS,
    DEFAULT_MIN_RANGE,
    DEFAULT_N_BEAMS,
    DEFAULT_R_ARRIVE,
    DEFAULT_R_COLLISION,
    DEFAULT_ROBOT_RADIUS,
    DEFAULT_V_MAX,
    DEFAULT_W_MAX,
    MAX_SAMPLE_REJECTIONS,
)
from mapless_planner.utils import wrap_angle

logger = logging.getLogger(__name__)

BUNDLED_WORLDS = ("env1", "env2", "test7x10")


class WorldError(ValueError):
    """A world description is malformed or geometrically invalid."""


class InfeasibleWorldError(RuntimeError):
    """No free position could be sampled."""


class EpisodeDoneError(RuntimeError):
    """Stepping an episode that already finished."""


class Event(str, Enum):
    NONE = "none"
    ARRIVE = "arrive"
    COLLIDE = "collide"
    TIMEOUT = "timeout"


TERMINAL_EVENTS = frozenset({Event.ARRIVE, Event.COLLIDE})


# =============================================================================
# Configuration types
# =============================================================================


@dataclass(frozen=True)
class LidarSpec:
    n_beams: int = DEFAULT_N_BEAMS
    fov_min: float = DEFAULT_FOV_MIN
    fov_max: float = DEFAULT_FOV_MAX
    max_range: float = DEFAULT_MAX_RANGE
    min_range: float = DEFAULT_MIN_RANGE

    def __post_init__(self) -> None:
        if self.n_beams < 2:
            raise ValueError("n_beams must be >= 2")
        if not self.fov_min < self.fov_max:
            raise ValueError("fov_min must be < fov_max")
        if not 0.0 <= self.min_range < self.max_range:
            raise ValueError("min_range must satisfy 0 <= min_range < max_range")

    def beam_angles(self) -> np.ndarray:
        """Beam angles in the robot frame, equally spaced, endpoints included."""
        return np.linspace(self.fov_min, self.fov_max, self.n_beams)


@dataclass(frozen=True)
class RewardConfig:
    r_arrive: float = DEFAULT_R_ARRIVE
    r_collision: float = DEFAULT_R_COLLISION
    c_r: float = DEFAULT_C_R
    c_d: float = DEFAULT_C_D
    c_o: float = DEFAULT_C_O

    def __post_init__(self) -> None:
        if not self.r_arrive > 0.0:
            raise ValueError("r_arrive must be > 0")
        if not self.r_collision < 0.0:
            raise ValueError("r_collision must be < 0")
        if not self.c_d > 0.0:
            raise ValueError("c_d must be > 0")
        if not self.c_o >= 0.0:
            raise ValueError("c_o must be >= 0")


@dataclass(frozen=True)
class EpisodeConfig:
    dt: float = DEFAULT_DT
    max_steps: int = DEFAULT_MAX_STEPS
    v_max: float = DEFAULT_V_MAX
    w_max: float = DEFAULT_W_MAX
    robot_radius: float = DEFAULT_ROBOT_RADIUS

    def __post_init__(self) -> None:
        if not self.dt > 0.0:
            raise ValueError("dt must be > 0")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if not self.v_max > 0.0:
            raise ValueError("v_max must be > 0")
        if not self.w_max > 0.0:
            raise ValueError("w_max must be > 0")
        if not self.robot_radius > 0.0:
            raise ValueError("robot_radius must be > 0")


# =============================================================================
# World
# =============================================================================


def _cross(ax, ay, bx, by):
    return ax * by - ay * bx


def _segments_cross(p1, p2, q1, q2) -> bool:
    """Proper or touching intersection of two closed segments."""
    d1 = _cross(q2[0] - q1[0], q2[1] - q1[1], p1[0] - q1[0], p1[1] - q1[1])
    d2 = _cross(q2[0] - q1[0], q2[1] - q1[1], p2[0] - q1[0], p2[1] - q1[1])
    d3 = _cross(p2[0] - p1[0], p2[1] - p1[1], q1[0] - p1[0], q1[1] - p1[1])
    d4 = _cross(p2[0] - p1[0], p2[1] - p1[1], q2[0] - p1[0], q2[1] - p1[1])
    return (d1 * d2 <= 0.0) and (d3 * d4 <= 0.0) and not (d1 == d2 == d3 == d4 == 0.0)


def _is_simple(poly: np.ndarray) -> bool:
    n = len(poly)
    for i in range(n):
        a1, a2 = poly[i], poly[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or j == (i + 1) % n:
                continue
            if _segments_cross(a1, a2, poly[j], poly[(j + 1) % n]):
                return False
    return True


@dataclass(frozen=True, eq=False)
class WorldSpec:
    """Immutable rectangular world with polygonal obstacles."""

    bounds: tuple[float, float]
    obstacles: tuple[np.ndarray, ...] = ()
    spawn_region: tuple[float, float, float, float] | None = None
    min_clearance: float = 0.3
    name: str = field(default="world", compare=False)

    def __post_init__(self) -> None:
        w, h = (float(v) for v in self.bounds)
        if not (w > 0.0 and h > 0.0):
            raise WorldError("bounds must be positive")
        object.__setattr__(self, "bounds", (w, h))
        polys = tuple(np.asarray(p, dtype=np.float64).reshape(-1, 2) for p in self.obstacles)
        for k, poly in enumerate(polys):
            if len(poly) < 3:
                raise WorldError(f"obstacle {k} has fewer than 3 vertices")
            lo, hi = poly.min(axis=0), poly.max(axis=0)
            if lo[0] < 0 or lo[1] < 0 or hi[0] > w or hi[1] > h:
                raise WorldError(f"obstacle {k} lies outside the bounds")
            if not _is_simple(poly):
                raise WorldError(f"obstacle {k} is self-intersecting")
        object.__setattr__(self, "obstacles", polys)
        if self.spawn_region is None:
            spawn = (0.0, 0.0, w, h)
        else:
            spawn = tuple(float(v) for v in self.spawn_region)
        if len(spawn) != 4 or not (0 <= spawn[0] < spawn[2] <= w and 0 <= spawn[1] < spawn[3] <= h):
            raise WorldError("spawn region must be a rectangle inside the bounds")
        object.__setattr__(self, "spawn_region", spawn)
        if not self.min_clearance > 0.0:
            raise WorldError("min_clearance must be > 0")

    @cached_property
    def segments(self) -> np.ndarray:
        """Every obstacle edge plus the four walls as rows ``(x1, y1, x2, y2)``."""
        w, h = self.bounds
        rows = [(0, 0, w, 0), (w, 0, w, h), (w, h, 0, h), (0, h, 0, 0)]
        for poly in self.obstacles:
            nxt = np.roll(poly, -1, axis=0)
            rows.extend(np.hstack([poly, nxt]).tolist())
        return np.asarray(rows, dtype=np.float64)

    def contains(self, point: Sequence[float]) -> bool:
        w, h = self.bounds
        return 0.0 <= point[0] <= w and 0.0 <= point[1] <= h


def world_from_dict(data: dict[str, Any], name: str = "world") -> WorldSpec:
    """Build a world from its JSON document."""
    try:
        bounds = data["bounds"]
        obstacles = [o["polygon"] for o in data.get("obstacles", [])]
        return WorldSpec(
            bounds=(bounds[0], bounds[1]),
            obstacles=tuple(obstacles),
            spawn_region=data.get("spawn"),
            min_clearance=data.get("min_clearance", 0.3),
            name=name,
        )
    except (KeyError, TypeError, IndexError) as exc:
        raise WorldError(f"malformed world document: {exc}") from exc


def world_to_dict(world: WorldSpec) -> dict[str, Any]:
    return {
        "bounds": list(world.bounds),
        "obstacles": [{"polygon": poly.tolist()} for poly in world.obstacles],
        "spawn": list(world.spawn_region),
        "min_clearance": world.min_clearance,
    }


def bundled_world(name: str) -> WorldSpec:
    """Load one of the worlds shipped with the package."""
    if name not in BUNDLED_WORLDS:
        raise WorldError(f"unknown bundled world {name!r}; choose from {BUNDLED_WORLDS}")
    text = (files("mapless_planner") / "worlds" / f"{name}.json").read_text(encoding="utf-8")
    return world_from_dict(json.loads(text), name=name)


def load_world(path_or_name: str | Path) -> WorldSpec:
    """Load a world from a JSON file, or a bundled world by name."""
    path = Path(path_or_name)
    if not path.exists() and str(path_or_name) in BUNDLED_WORLDS:
        return bundled_world(str(path_or_name))
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise WorldError(f"cannot read world {path}: {exc}") from exc
    return world_from_dict(data, name=path.stem)


# =============================================================================
# Geometry
# =============================================================================


def cast_rays(
    world: WorldSpec,
    origin: Sequence[float],
    angles: np.ndarray | Sequence[float],
    spec: LidarSpec,
) -> np.ndarray:
    """Nearest hit distance along each ray, clamped to ``[min_range, max_range]``."""
    angles = np.atleast_1d(np.asarray(angles, dtype=np.float64))
    seg = world.segments
    dx, dy = np.cos(angles)[:, None], np.sin(angles)[:, None]
    ex, ey = (seg[:, 2] - seg[:, 0])[None, :], (seg[:, 3] - seg[:, 1])[None, :]
    wx, wy = (seg[:, 0] - origin[0])[None, :], (seg[:, 1] - origin[1])[None, :]

    denom = _cross(dx, dy, ex, ey)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = _cross(wx, wy, ex, ey) / denom
        u = _cross(wx, wy, dx, dy) / denom
    hit = (np.abs(denom) > 1e-12) & (t >= 0.0) & (u >= 0.0) & (u <= 1.0)
    nearest = np.where(hit, t, np.inf).min(axis=1)
    return np.clip(nearest, spec.min_range, spec.max_range)


def cast_ray(world: WorldSpec, origin: Sequence[float], angle: float, spec: LidarSpec) -> float:
    return float(cast_rays(world, origin, [angle], spec)[0])


def point_in_polygon(point: Sequence[float], polygon: np.ndarray) -> bool:
    """Even-odd rule; points on the boundary may fall either way."""
    x, y = point
    xs, ys = polygon[:, 0], polygon[:, 1]
    xn, yn = np.roll(xs, -1), np.roll(ys, -1)
    straddle = (ys > y) != (yn > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        x_cross = xs + (y - ys) * (xn - xs) / (yn - ys)
    return bool(np.count_nonzero(straddle & (x < x_cross)) % 2)


def clearance(world: WorldSpec, point: Sequence[float]) -> float:
    """Distance from ``point`` to the nearest obstacle edge or wall."""
    seg = world.segments
    p = np.asarray(point, dtype=np.float64)
    a, b = seg[:, :2], seg[:, 2:]
    ab = b - a
    denom = np.einsum("ij,ij->i", ab, ab)
    s = np.clip(np.einsum("ij,ij->i", p - a, ab) / np.where(denom > 0, denom, 1.0), 0.0, 1.0)
    closest = a + s[:, None] * ab
    return float(np.sqrt(((closest - p) ** 2).sum(axis=1)).min())


def is_free(world: WorldSpec, point: Sequence[float], margin: float) -> bool:
    if not world.contains(point):
        return False
    if any(point_in_polygon(point, poly) for poly in world.obstacles):
        return False
    return clearance(world, point) >= margin


def sample_free_pose(
    world: WorldSpec,
    rng: np.random.Generator,
    clearance: float,
    region: tuple[float, float, float, float] | None = None,
) -> np.ndarray:
    """Uniform rejection sample of a point at least ``clearance`` from obstacles and walls."""
    x0, y0, x1, y1 = region if region is not None else (0.0, 0.0, *world.bounds)
    for _ in range(MAX_SAMPLE_REJECTIONS):
        point = rng.uniform((x0, y0), (x1, y1))
        if is_free(world, point, clearance):
            return point
    raise InfeasibleWorldError(
        f"no free point with clearance {clearance} after {MAX_SAMPLE_REJECTIONS} draws "
        f"in {world.name}"
    )


# =============================================================================
# Robot
# =============================================================================


@dataclass(frozen=True)
class RobotState:
    x: float
    y: float
    theta: float = 0.0
    radius: float = DEFAULT_ROBOT_RADIUS

    def __post_init__(self) -> None:
        object.__setattr__(self, "theta", wrap_angle(float(self.theta)))

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])


def step_kinematics(state: RobotState, cmd: Sequence[float], dt: float) -> RobotState:
    """Exact arc integration of the unicycle model over one control period."""
    v, w = float(cmd[0]), float(cmd[1])
    th = state.theta
    if abs(w) > 1e-9:
        x = state.x + (v / w) * (math.sin(th + w * dt) - math.sin(th))
        y = state.y + (v / w) * (math.cos(th) - math.cos(th + w * dt))
    else:
        x = state.x + v * dt * math.cos(th)
        y = state.y + v * dt * math.sin(th)
    return RobotState(x, y, th + w * dt, state.radius)


def relative_target_polar(robot: RobotState, target: Sequence[float]) -> tuple[float, float]:
    """Target distance and bearing in the robot frame."""
    dx, dy = target[0] - robot.x, target[1] - robot.y
    d = math.hypot(dx, dy)
    if d == 0.0:
        return 0.0, 0.0
    return d, wrap_angle(math.atan2(dy, dx) - robot.theta)


def scan(world: WorldSpec, robot: RobotState, spec: LidarSpec) -> np.ndarray:
    """Normalized ranges in (0, 1] for the configured beams."""
    angles = spec.beam_angles() + robot.theta
    return cast_rays(world, (robot.x, robot.y), angles, spec) / spec.max_range


def compute_reward(
    d_prev: float,
    d_t: float,
    min_raw_range: float,
    cfg: RewardConfig,
) -> tuple[float, Event]:
    """Arrival beats collision; otherwise reward progress toward the target."""
    if d_t < cfg.c_d:
        return cfg.r_arrive, Event.ARRIVE
    if min_raw_range < cfg.c_o:
        return cfg.r_collision, Event.COLLIDE
    return cfg.c_r * (d_prev - d_t), Event.NONE


# =============================================================================
# Episodes
# =============================================================================


@dataclass(frozen=True, eq=False)
class Observation:
    """Planner input: normalized ranges, previous command, target polar."""

    ranges: np.ndarray
    prev_cmd: tuple[float, float]
    target_polar: tuple[float, float]

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.ranges, self.prev_cmd, self.target_polar]).astype(np.float64)

    @property
    def width(self) -> int:
        return len(self.ranges) + 4


@dataclass(frozen=True)
class StepResult:
    observation: Observation
    reward: float
    done: bool
    event: Event

    @property
    def terminal(self) -> bool:
        """True for arrive/collide; timeouts bootstrap like ordinary steps."""
        return self.event in TERMINAL_EVENTS


class NavigationEnv:
    """Single-robot episode state machine over an immutable world."""

    def __init__(
        self,
        world: WorldSpec,
        *,
        lidar: LidarSpec | None = None,
        reward: RewardConfig | None = None,
        episode: EpisodeConfig | None = None,
        rng: np.random.Generator | None = None,
    ) -> None:
        self.world = world
        self.lidar = lidar or LidarSpec()
        self.reward_cfg = reward or RewardConfig()
        self.episode = episode or EpisodeConfig()
        if self.reward_cfg.c_o < self.lidar.min_range:
            raise ValueError("c_o must be >= the lidar min_range")
        self.rng = rng if rng is not None else np.random.default_rng()
        self.robot: RobotState | None = None
        self.target: np.ndarray | None = None
        self.steps = 0
        self.done = True
        self.last_event = Event.NONE
        self._distance = 0.0
        self._prev_cmd = (0.0, 0.0)

    def _sample_start_and_target(self) -> tuple[RobotState, np.ndarray]:
        margin = max(self.world.min_clearance, self.episode.robot_radius)
        for _ in range(100):
            start = sample_free_pose(self.world, self.rng, margin, self.world.spawn_region)
            target = sample_free_pose(self.world, self.rng, self.world.min_clearance)
            if np.hypot(*(target - start)) > 2.0 * self.reward_cfg.c_d:
                theta = self.rng.uniform(-math.pi, math.pi)
                return RobotState(start[0], start[1], theta, self.episode.robot_radius), target
        raise InfeasibleWorldError(f"cannot separate start and target in {self.world.name}")

    @property
    def last_command(self) -> tuple[float, float]:
        """The clipped (v, w) applied by the latest step."""
        return self._prev_cmd

    def observe(self) -> Observation:
        ranges = scan(self.world, self.robot, self.lidar)
        polar = relative_target_polar(self.robot, self.target)
        return Observation(ranges, self._prev_cmd, polar)

    def reset(
        self,
        start: RobotState | Sequence[float] | None = None,
        target: Sequence[float] | None = None,
    ) -> Observation:
        """Begin an episode; missing start/target are sampled collision-free."""
        if start is None or target is None:
            sampled_start, sampled_target = self._sample_start_and_target()
            start = sampled_start if start is None else start
            target = sampled_target if target is None else target
        if not isinstance(start, RobotState):
            theta = start[2] if len(start) > 2 else 0.0
            start = RobotState(start[0], start[1], theta, self.episode.robot_radius)
        self.robot = start
        self.target = np.asarray(target, dtype=np.float64)
        self.steps = 0
        self.done = False
        self.last_event = Event.NONE
        self._prev_cmd = (0.0, 0.0)
        self._distance = relative_target_polar(self.robot, self.target)[0]
        logger.debug("Episode reset: start=%s target=%s", self.robot, self.target)
        return self.observe()

    def step(self, action: Sequence[float]) -> StepResult:
        """Apply one velocity command and score the move."""
        if self.done:
            raise EpisodeDoneError("episode finished; call reset() first")
        v = float(np.clip(action[0], -self.episode.v_max, self.episode.v_max))
        w = float(np.clip(action[1], -self.episode.w_max, self.episode.w_max))

        self.robot = step_kinematics(self.robot, (v, w), self.episode.dt)
        self._prev_cmd = (v, w)
        obs = self.observe()
        d_t = obs.target_polar[0]
        min_raw = float(obs.ranges.min()) * self.lidar.max_range
        reward, event = compute_reward(self._distance, d_t, min_raw, self.reward_cfg)
        self._distance = d_t
        self.steps += 1
        if event is Event.NONE and self.steps >= self.episode.max_steps:
            event = Event.TIMEOUT
        self.done = event is not Event.NONE
        self.last_event = event
        return StepResult(obs, reward, self.done, event)


def env_step(env: NavigationEnv, action: Sequence[float]) -> StepResult:
    return env.step(action)
