"""Waypoint-sequence evaluation and policy timing.

A trained planner is driven through an ordered list of targets without
exploration noise. Every step lands in a trajectory log, and the report is
recomputed from that log plus the per-query timing samples.
"""

from __future__ import annotations

import json
import logging
import time
from collections.abc import Sequence
from dataclasses import asdict, dataclass
from importlib.resources import files
from pathlib import Path
from typing import Any, Protocol

import numpy as np
import pandas as pd

from mapless_planner.constants import (
    DEFAULT_EVAL_TRIALS,
    DEFAULT_FREQUENCY_DURATION,
    DEFAULT_LATENCY_QUERIES,
    TRAJECTORY_COLUMNS,
)
from mapless_planner.ddpg_agent import ActorNet, act, load_actor
from mapless_planner.sim2d import (
    BUNDLED_WORLDS,
    EpisodeConfig,
    Event,
    LidarSpec,
    NavigationEnv,
    RewardConfig,
    RobotState,
    WorldError,
    WorldSpec,
    is_free,
)
from mapless_planner.utils import write_toml

logger = logging.getLogger(__name__)

START_EVENT = "start"


@dataclass(frozen=True)
class EvalConfig:
    trials: int = DEFAULT_EVAL_TRIALS
    latency_queries: int = DEFAULT_LATENCY_QUERIES
    frequency_duration: float = DEFAULT_FREQUENCY_DURATION

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.latency_queries < DEFAULT_LATENCY_QUERIES:
            raise ValueError(f"latency_queries must be >= {DEFAULT_LATENCY_QUERIES}")
        if self.frequency_duration < 1.0:
            raise ValueError("frequency_duration must be >= 1 s")


@dataclass(frozen=True, eq=False)
class WaypointTask:
    """A world, a start pose and the targets to visit in order."""

    world: WorldSpec
    start: tuple[float, float, float]
    targets: tuple[tuple[float, float], ...]
    trials: int = DEFAULT_EVAL_TRIALS

    def __post_init__(self) -> None:
        if not self.targets:
            raise WorldError("a waypoint task needs at least one target")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        for k, target in enumerate(self.targets):
            if not is_free(self.world, target, 0.0):
                raise WorldError(f"target {k} at {target} is not free in {self.world.name}")


def load_targets(
    path_or_name: str | Path,
    world: WorldSpec,
    trials: int = DEFAULT_EVAL_TRIALS,
) -> WaypointTask:
    """Read a target list JSON (``{"start": [x, y, theta], "targets": [[x, y], ...]}``).

    A bundled world name loads the target list shipped with that world.
    """
    path = Path(path_or_name)
    try:
        if not path.exists() and str(path_or_name) in BUNDLED_WORLDS:
            resource = files("mapless_planner") / "worlds" / f"{path_or_name}_targets.json"
            text = resource.read_text(encoding="utf-8")
        else:
            text = path.read_text(encoding="utf-8")
        data = json.loads(text)
        start = tuple(float(v) for v in data["start"])
        if len(start) == 2:
            start = (*start, 0.0)
        targets = tuple((float(t[0]), float(t[1])) for t in data["targets"])
    except (OSError, json.JSONDecodeError, KeyError, TypeError, IndexError, ValueError) as exc:
        raise WorldError(f"cannot read target list {path_or_name}: {exc}") from exc
    return WaypointTask(world, start, targets, trials)


# =============================================================================
# Policies
# =============================================================================


class Policy(Protocol):
    """Maps an observation to a ``(v, w)`` command."""

    obs_width: int

    def __call__(self, obs: Any) -> np.ndarray: ...


@dataclass
class ActorPolicy:
    """Greedy, noise-free command from a trained actor."""

    actor: ActorNet

    @property
    def obs_width(self) -> int:
        return self.actor.net.in_width

    def __call__(self, obs: Any) -> np.ndarray:
        return act(self.actor, obs)[1]


def load_policy(checkpoint_dir: str | Path) -> ActorPolicy:
    """Load the online actor of an agent checkpoint as a policy.

    Raises:
        CheckpointError: The checkpoint is missing or unreadable
    """
    return ActorPolicy(load_actor(checkpoint_dir))


# =============================================================================
# Reports
# =============================================================================


@dataclass(frozen=True)
class MetricsReport:
    """Evaluation summary; times in seconds, distances in meters."""

    max_control_frequency: float  # commands per minute
    total_time: float
    total_distance: float
    successes: int
    collisions: int
    timeouts: int
    mean_query_latency: float
    trials: int = 1

    def to_dict(self) -> dict[str, float | int]:
        return asdict(self)

    def to_frame(self) -> pd.DataFrame:
        """Single-row frame for aggregating several reports into a table."""
        return pd.DataFrame([self.to_dict()])

    def write(self, directory: str | Path) -> Path:
        """Write ``report.toml`` and ``report.csv`` into ``directory``."""
        path = Path(directory)
        path.mkdir(parents=True, exist_ok=True)
        write_toml({"report": self.to_dict()}, path / "report.toml")
        self.to_frame().to_csv(path / "report.csv", index=False)
        return path


def summarize(trajectory: pd.DataFrame, latencies: Sequence[float], dt: float) -> MetricsReport:
    """Build a report from a trajectory log and per-query timing samples.

    Each ``(trial, target_idx)`` group starts with the leg's start row, so
    distance is integrated within legs and never across a reset.
    """
    legs = trajectory.groupby(["trial", "target_idx"], sort=False)
    distance = 0.0
    for _, leg in legs:
        xy = leg[["x_m", "y_m"]].to_numpy()
        distance += float(np.hypot(*np.diff(xy, axis=0).T).sum())
    moves = len(trajectory) - legs.ngroups
    events = trajectory["event"].value_counts()
    lat = np.asarray(latencies, dtype=np.float64)
    mean_latency = float(lat.mean()) if lat.size else 0.0
    return MetricsReport(
        max_control_frequency=60.0 / mean_latency if mean_latency > 0.0 else 0.0,
        total_time=moves * dt,
        total_distance=distance,
        successes=int(events.get(Event.ARRIVE.value, 0)),
        collisions=int(events.get(Event.COLLIDE.value, 0)),
        timeouts=int(events.get(Event.TIMEOUT.value, 0)),
        mean_query_latency=mean_latency,
        trials=int(trajectory["trial"].nunique()) if len(trajectory) else 0,
    )


# =============================================================================
# Evaluation
# =============================================================================


def _row(step, dt, robot, cmd, reward, event, target_idx, trial) -> tuple:
    return (
        step,
        step * dt,
        robot.x,
        robot.y,
        robot.theta,
        float(cmd[0]),
        float(cmd[1]),
        float(reward),
        event,
        target_idx,
        trial,
    )


def run_waypoint_eval(
    task: WaypointTask,
    policy: Policy,
    episode: EpisodeConfig | None = None,
    reward: RewardConfig | None = None,
    lidar: LidarSpec | None = None,
) -> tuple[MetricsReport, pd.DataFrame]:
    """Drive the policy through every target, ``task.trials`` times.

    A leg ends on arrival, collision or timeout. After an arrival the next
    leg starts where the robot stopped; after a failure the robot is placed
    on the failed target with its last heading.

    Args:
        task: World, start pose and ordered targets
        policy: Observation -> (v, w) command
        episode: Time step, step limit and velocity bounds per leg
        reward: Arrival/collision thresholds
        lidar: Sensor used to build observations

    Returns:
        Tuple of (MetricsReport, trajectory DataFrame)
    """
    episode = episode or EpisodeConfig()
    env = NavigationEnv(task.world, lidar=lidar, reward=reward, episode=episode)
    c_d = env.reward_cfg.c_d
    rows: list[tuple] = []
    latencies: list[float] = []

    for trial in range(task.trials):
        x, y, theta = task.start
        robot = RobotState(x, y, theta, episode.robot_radius)
        step = 0
        for idx, target in enumerate(task.targets):
            obs = env.reset(start=robot, target=target)
            arrived = obs.target_polar[0] < c_d
            event = Event.ARRIVE.value if arrived else START_EVENT
            rows.append(_row(step, episode.dt, robot, (0.0, 0.0), 0.0, event, idx, trial))
            if arrived:
                continue
            while True:
                started = time.perf_counter()
                cmd = policy(obs)
                latencies.append(time.perf_counter() - started)
                result = env.step(cmd)
                step += 1
                rows.append(
                    _row(
                        step,
                        episode.dt,
                        env.robot,
                        env.last_command,
                        result.reward,
                        result.event.value,
                        idx,
                        trial,
                    )
                )
                obs = result.observation
                if result.done:
                    break
            if env.last_event is Event.ARRIVE:
                robot = env.robot
            else:
                robot = RobotState(target[0], target[1], env.robot.theta, episode.robot_radius)
                logger.info("Trial %d: leg %d ended with %s", trial, idx, env.last_event.value)

    trajectory = pd.DataFrame(rows, columns=list(TRAJECTORY_COLUMNS))
    report = summarize(trajectory, latencies, episode.dt)
    logger.info(
        "Evaluated %d trial(s): %d arrivals, %d collisions, %d timeouts",
        task.trials,
        report.successes,
        report.collisions,
        report.timeouts,
    )
    return report, trajectory


# =============================================================================
# Timing
# =============================================================================


@dataclass(frozen=True)
class LatencyStats:
    mean: float
    p99: float


def _random_observations(policy: Policy, n: int, rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(0.0, 1.0, size=(n, policy.obs_width))


def measure_query_latency(
    policy: Policy,
    n_queries: int = DEFAULT_LATENCY_QUERIES,
    rng: np.random.Generator | None = None,
) -> LatencyStats:
    """Wall-clock seconds per policy query on random observations."""
    if n_queries < DEFAULT_LATENCY_QUERIES:
        raise ValueError(f"n_queries must be >= {DEFAULT_LATENCY_QUERIES}")
    rng = rng if rng is not None else np.random.default_rng()
    observations = _random_observations(policy, n_queries, rng)
    samples = np.empty(n_queries)
    for k, obs in enumerate(observations):
        started = time.perf_counter()
        policy(obs)
        samples[k] = time.perf_counter() - started
    return LatencyStats(mean=float(samples.mean()), p99=float(np.percentile(samples, 99)))


def max_control_frequency(
    policy: Policy,
    duration: float = DEFAULT_FREQUENCY_DURATION,
    rng: np.random.Generator | None = None,
) -> float:
    """Policy queries completed per minute in a tight loop."""
    if duration < 1.0:
        raise ValueError("duration must be >= 1 s")
    rng = rng if rng is not None else np.random.default_rng()
    observations = _random_observations(policy, 256, rng)
    count = 0
    started = time.perf_counter()
    elapsed = 0.0
    while elapsed < duration:
        policy(observations[count % len(observations)])
        count += 1
        elapsed = time.perf_counter() - started
    return count / elapsed * 60.0
