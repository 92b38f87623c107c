"""Training loop with sample collection decoupled from gradient updates.

In async mode one or more sampler threads keep running episodes with the most
recently published actor snapshot while the trainer thread performs DDPG
updates. Sync mode interleaves a fixed number of environment steps with each
update on a single thread and is bit-for-bit reproducible under a seed.
"""

from __future__ import annotations

import logging
import threading
import time
from collections import deque
from collections.abc import Callable
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Protocol

import numpy as np
import pandas as pd

from mapless_planner.constants import (
    DEFAULT_CHECKPOINT_INTERVAL,
    DEFAULT_N_SAMPLERS,
    DEFAULT_SNAPSHOT_INTERVAL,
    DEFAULT_SYNC_ENV_STEPS_PER_TRAIN,
    DEFAULT_TOTAL_TRAIN_STEPS,
    METRICS_COLUMNS,
    PROGRESS_EVERY,
    RETURN_WINDOW,
)
from mapless_planner.ddpg_agent import (
    ActorNet,
    DDPGAgent,
    NoiseConfig,
    OUNoise,
    ReplayBuffer,
    Transition,
    act,
)
from mapless_planner.utils import as_vector, spawn_rngs

logger = logging.getLogger(__name__)

MODES = ("async", "sync")


class RunAbortedError(RuntimeError):
    """A sampler or the trainer failed; the original error is chained."""


class TrainingEnv(Protocol):
    """What the runner needs from an environment.

    ``reset`` returns an observation (anything :func:`as_vector` accepts) and
    ``step`` returns an object with ``observation``, ``reward``, ``done``,
    ``terminal`` and ``event`` attributes.
    """

    def reset(self) -> Any: ...

    def step(self, action: np.ndarray) -> Any: ...


EnvFactory = Callable[[np.random.Generator], TrainingEnv]


@dataclass(frozen=True)
class RunConfig:
    mode: str = "async"
    n_samplers: int = DEFAULT_N_SAMPLERS
    sync_env_steps_per_train: int = DEFAULT_SYNC_ENV_STEPS_PER_TRAIN
    total_train_steps: int = DEFAULT_TOTAL_TRAIN_STEPS
    snapshot_interval: int = DEFAULT_SNAPSHOT_INTERVAL
    checkpoint_interval: int = DEFAULT_CHECKPOINT_INTERVAL
    seed: int = 0

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.n_samplers < 1:
            raise ValueError("n_samplers must be >= 1")
        if self.sync_env_steps_per_train < 1:
            raise ValueError("sync_env_steps_per_train must be >= 1")
        if self.total_train_steps < 0:
            raise ValueError("total_train_steps must be >= 0")
        if self.snapshot_interval < 1:
            raise ValueError("snapshot_interval must be >= 1")
        if self.checkpoint_interval < 1:
            raise ValueError("checkpoint_interval must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be >= 0")


class RunCounters:
    """Monotone run counters shared between threads."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self.samples_collected = 0
        self.train_iterations = 0
        self.episodes = 0
        self.snapshots_published = 0
        self.arrivals = 0
        self.collisions = 0
        self.timeouts = 0
        self.wall_time = 0.0
        self._returns: deque[float] = deque(maxlen=RETURN_WINDOW)

    def add_sample(self) -> None:
        with self._lock:
            self.samples_collected += 1

    def add_episode(self, episode_return: float, event: Any) -> None:
        name = getattr(event, "value", event)
        with self._lock:
            self.episodes += 1
            self._returns.append(episode_return)
            if name == "arrive":
                self.arrivals += 1
            elif name == "collide":
                self.collisions += 1
            elif name == "timeout":
                self.timeouts += 1

    def add_train_iteration(self) -> int:
        with self._lock:
            self.train_iterations += 1
            return self.train_iterations

    def add_snapshot(self) -> None:
        with self._lock:
            self.snapshots_published += 1

    def mean_return(self) -> float:
        with self._lock:
            return float(np.mean(self._returns)) if self._returns else float("nan")

    def as_dict(self) -> dict[str, float]:
        with self._lock:
            return {
                "samples_collected": self.samples_collected,
                "train_iterations": self.train_iterations,
                "episodes": self.episodes,
                "snapshots_published": self.snapshots_published,
                "arrivals": self.arrivals,
                "collisions": self.collisions,
                "timeouts": self.timeouts,
                "wall_time": self.wall_time,
            }


@dataclass(frozen=True)
class PolicySnapshot:
    """Read-only copy of the actor as of ``train_iteration``."""

    actor: ActorNet
    train_iteration: int


def publish_snapshot(actor: ActorNet, train_iteration: int = 0) -> PolicySnapshot:
    """Deep-copy the trainer's actor for samplers."""
    return PolicySnapshot(actor.copy(), train_iteration)


class _SnapshotSlot:
    def __init__(self, snapshot: PolicySnapshot) -> None:
        self._lock = threading.Lock()
        self._snapshot = snapshot

    def get(self) -> PolicySnapshot:
        with self._lock:
            return self._snapshot

    def replace(self, snapshot: PolicySnapshot) -> None:
        with self._lock:
            self._snapshot = snapshot


class MetricsLog:
    """CSV metrics sink with columns ``iter,samples,mean_q,mean_return,wall_s``.

    The header is written on creation so an unwritable path fails before
    training starts. Rows are buffered and appended on :meth:`flush`; once on
    disk they are dropped from memory. Without a path every row stays in
    :attr:`rows`.
    """

    def __init__(self, path: str | Path | None = None, flush_every: int = 1000) -> None:
        self.path = Path(path) if path is not None else None
        self.flush_every = flush_every
        self.rows: list[dict[str, float]] = []
        self._pending = 0
        if self.path is not None:
            pd.DataFrame(columns=list(METRICS_COLUMNS)).to_csv(self.path, index=False)

    def append(self, row: dict[str, float]) -> None:
        self.rows.append(row)
        self._pending += 1
        if self._pending >= self.flush_every:
            self.flush()

    def flush(self) -> None:
        if self.path is None or self._pending == 0:
            self._pending = 0
            return
        frame = pd.DataFrame(self.rows, columns=list(METRICS_COLUMNS))
        frame.to_csv(self.path, mode="a", header=False, index=False)
        self.rows.clear()
        self._pending = 0

    def frame(self) -> pd.DataFrame:
        if self.path is None:
            return pd.DataFrame(self.rows, columns=list(METRICS_COLUMNS))
        self.flush()
        return pd.read_csv(self.path, float_precision="round_trip")


def log_progress(
    log: MetricsLog,
    counters: RunCounters,
    batch_mean_q: float,
    wall_s: float,
) -> None:
    """Append one metrics row for the train iteration just completed."""
    log.append(
        {
            "iter": counters.train_iterations,
            "samples": counters.samples_collected,
            "mean_q": batch_mean_q,
            "mean_return": counters.mean_return(),
            "wall_s": wall_s,
        }
    )


@dataclass
class RunSinks:
    metrics: MetricsLog = field(default_factory=MetricsLog)
    checkpoint_dir: Path | None = None
    quiet: bool = False


@dataclass
class RunResult:
    agent: DDPGAgent
    counters: RunCounters
    metrics: pd.DataFrame


class _Sampler:
    """Runs episodes with the latest snapshot and feeds the replay buffer."""

    def __init__(
        self,
        env: TrainingEnv,
        buffer: ReplayBuffer,
        counters: RunCounters,
        slot: _SnapshotSlot,
        noise_cfg: NoiseConfig,
        rng: np.random.Generator,
        action_width: int,
        progress: Callable[[], float],
    ) -> None:
        self.env = env
        self.buffer = buffer
        self.counters = counters
        self.slot = slot
        self.noise_cfg = noise_cfg
        self.noise = OUNoise.from_config(noise_cfg, action_width)
        self.rng = rng
        self.progress = progress
        self.obs = as_vector(env.reset())
        self.episode_return = 0.0

    def step(self) -> None:
        snapshot = self.slot.get()
        self.noise.sigma = self.noise_cfg.sigma_at(self.progress())
        raw, command = act(snapshot.actor, self.obs, self.noise, self.rng)
        result = self.env.step(command)
        obs_next = as_vector(result.observation)
        self.buffer.push(Transition(self.obs, raw, float(result.reward), obs_next, result.terminal))
        self.counters.add_sample()
        self.episode_return += float(result.reward)
        if result.done:
            self.counters.add_episode(self.episode_return, result.event)
            self.episode_return = 0.0
            self.obs = as_vector(self.env.reset())
        else:
            self.obs = obs_next


def agent_rng(seed: int) -> np.random.Generator:
    """Stream 1 of the run seed, reserved for network initialization."""
    return spawn_rngs(seed, 2)[1]


def run_training(
    env_factory: EnvFactory,
    agent: DDPGAgent,
    cfg: RunConfig,
    sinks: RunSinks | None = None,
    noise_cfg: NoiseConfig | None = None,
) -> RunResult:
    """Train ``agent`` for ``cfg.total_train_steps`` updates.

    Args:
        env_factory: Called with a dedicated Generator per sampler
        agent: Agent updated in place
        cfg: Run configuration (mode, samplers, step budget, seed)
        sinks: Metrics log, checkpoint directory and verbosity
        noise_cfg: Exploration noise parameters

    Returns:
        RunResult with the trained agent, final counters and the metrics frame
    """
    sinks = sinks or RunSinks()
    noise_cfg = noise_cfg or NoiseConfig()
    counters = RunCounters()
    if cfg.total_train_steps == 0:
        sinks.metrics.flush()
        return RunResult(agent, counters, sinks.metrics.frame())

    action_width = agent.actor.net.out_width
    buffer = ReplayBuffer(
        agent.hyper.buffer_capacity, agent.actor.net.in_width, action_width
    )
    rngs = spawn_rngs(cfg.seed, 2 + 2 * cfg.n_samplers)
    batch_rng = rngs[0]
    slot = _SnapshotSlot(publish_snapshot(agent.actor, 0))

    def progress() -> float:
        return counters.train_iterations / cfg.total_train_steps

    n_samplers = 1 if cfg.mode == "sync" else cfg.n_samplers
    samplers = [
        _Sampler(
            env_factory(rngs[2 + 2 * k]),
            buffer,
            counters,
            slot,
            noise_cfg,
            rngs[3 + 2 * k],
            action_width,
            progress,
        )
        for k in range(n_samplers)
    ]

    logger.info(
        "Training %d steps in %s mode with %d sampler(s)",
        cfg.total_train_steps,
        cfg.mode,
        n_samplers,
    )
    start = time.perf_counter()
    if cfg.mode == "sync":
        try:
            _run_sync(samplers[0], agent, buffer, batch_rng, slot, counters, cfg, sinks)
        except Exception as exc:
            raise RunAbortedError(f"sync run failed: {exc}") from exc
    else:
        _run_async(samplers, agent, buffer, batch_rng, slot, counters, cfg, sinks, start)
    counters.wall_time = time.perf_counter() - start
    sinks.metrics.flush()
    if sinks.checkpoint_dir is not None:
        agent.save(Path(sinks.checkpoint_dir) / "final")
    logger.info("Finished: %s", counters.as_dict())
    return RunResult(agent, counters, sinks.metrics.frame())


def _train_once(
    agent: DDPGAgent,
    buffer: ReplayBuffer,
    rng: np.random.Generator,
    slot: _SnapshotSlot,
    counters: RunCounters,
    cfg: RunConfig,
    sinks: RunSinks,
    wall_s: float,
) -> bool:
    """One trainer iteration; False when the buffer is still warming up."""
    hyper = agent.hyper
    if not buffer.ready(hyper.batch_size, hyper.warmup_steps):
        return False
    batch = buffer.sample(hyper.batch_size, rng, hyper.warmup_steps)
    stats = agent.train_step(batch)
    it = counters.add_train_iteration()
    if it % cfg.snapshot_interval == 0:
        slot.replace(publish_snapshot(agent.actor, it))
        counters.add_snapshot()
    log_progress(sinks.metrics, counters, stats.mean_q, wall_s)
    if it % PROGRESS_EVERY == 0 and not sinks.quiet:
        logger.info(
            "iter %d samples %d mean_q %.4f loss %.4f episodes %d",
            it,
            counters.samples_collected,
            stats.mean_q,
            stats.critic_loss,
            counters.episodes,
        )
    if sinks.checkpoint_dir is not None and it % cfg.checkpoint_interval == 0:
        path = agent.save(Path(sinks.checkpoint_dir) / f"step_{it:08d}")
        logger.info("Checkpoint written to %s", path)
    return True


def _run_sync(
    sampler: _Sampler,
    agent: DDPGAgent,
    buffer: ReplayBuffer,
    rng: np.random.Generator,
    slot: _SnapshotSlot,
    counters: RunCounters,
    cfg: RunConfig,
    sinks: RunSinks,
) -> None:
    while counters.train_iterations < cfg.total_train_steps:
        for _ in range(cfg.sync_env_steps_per_train):
            sampler.step()
        # wall_s stays 0.0 so sync logs are reproducible byte for byte
        _train_once(agent, buffer, rng, slot, counters, cfg, sinks, 0.0)


def _run_async(
    samplers: list[_Sampler],
    agent: DDPGAgent,
    buffer: ReplayBuffer,
    rng: np.random.Generator,
    slot: _SnapshotSlot,
    counters: RunCounters,
    cfg: RunConfig,
    sinks: RunSinks,
    start: float,
) -> None:
    stop = threading.Event()
    failures: list[BaseException] = []

    def sampler_loop(sampler: _Sampler) -> None:
        try:
            while not stop.is_set():
                sampler.step()
        except BaseException as exc:
            logger.exception("Sampler thread failed")
            failures.append(exc)
            stop.set()

    threads = [
        threading.Thread(target=sampler_loop, args=(s,), name=f"sampler-{k}", daemon=True)
        for k, s in enumerate(samplers)
    ]
    for t in threads:
        t.start()
    try:
        while counters.train_iterations < cfg.total_train_steps and not stop.is_set():
            wall_s = time.perf_counter() - start
            if not _train_once(agent, buffer, rng, slot, counters, cfg, sinks, wall_s):
                time.sleep(0.001)
    except BaseException as exc:
        logger.exception("Trainer failed")
        stop.set()
        for t in threads:
            t.join()
        raise RunAbortedError(f"trainer failed: {exc}") from exc
    stop.set()
    for t in threads:
        t.join()
    if failures:
        raise RunAbortedError(f"sampler failed: {failures[0]}") from failures[0]
