"""Torque-limited pendulum swing-up, used to compare async and sync training.

The dynamics and cost follow the standard swing-up benchmark: angle 0 is
upright, the torque is clipped to [-2, 2] and the angular speed to [-8, 8].
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import pandas as pd
from scipy.integrate import trapezoid

from mapless_planner.async_runner import MetricsLog, RunConfig, RunSinks, agent_rng, run_training
from mapless_planner.constants import (
    PENDULUM_DT,
    PENDULUM_EPISODE_LENGTH,
    PENDULUM_G,
    PENDULUM_HIDDEN_WIDTH,
    PENDULUM_L,
    PENDULUM_M,
    PENDULUM_MAX_SPEED,
    PENDULUM_MAX_TORQUE,
)
from mapless_planner.ddpg_agent import (
    ActorNet,
    CriticNet,
    DDPGAgent,
    Hyperparams,
    NoiseConfig,
    act,
)
from mapless_planner.tensor_nn import Activation, NetShape, init_params
from mapless_planner.utils import write_toml, wrap_angle

logger = logging.getLogger(__name__)

PENDULUM_HYPERPARAMS = Hyperparams(
    lr_actor=1e-3,
    lr_critic=1e-3,
    tau=0.005,
    batch_size=64,
    buffer_capacity=100_000,
    warmup_steps=1_000,
    hidden_width=PENDULUM_HIDDEN_WIDTH,
)
PENDULUM_NOISE = NoiseConfig(theta=0.15, sigma=0.3, sigma_final=0.1, dt=1.0)


@dataclass(frozen=True)
class PendulumState:
    th: float
    thdot: float

    def __post_init__(self) -> None:
        clipped = min(max(self.thdot, -PENDULUM_MAX_SPEED), PENDULUM_MAX_SPEED)
        object.__setattr__(self, "thdot", clipped)


def observe(state: PendulumState) -> np.ndarray:
    return np.array([math.cos(state.th), math.sin(state.th), state.thdot])


def pendulum_step(state: PendulumState, u: float) -> tuple[PendulumState, float, np.ndarray]:
    """Advance one step; the cost is evaluated on the pre-step state."""
    u = min(max(float(u), -PENDULUM_MAX_TORQUE), PENDULUM_MAX_TORQUE)
    th, thdot = state.th, state.thdot
    reward = -(wrap_angle(th) ** 2 + 0.1 * thdot**2 + 0.001 * u**2)

    g, m, length, dt = PENDULUM_G, PENDULUM_M, PENDULUM_L, PENDULUM_DT
    new_thdot = thdot + (3.0 * g / (2.0 * length) * math.sin(th) + 3.0 / (m * length**2) * u) * dt
    new_thdot = min(max(new_thdot, -PENDULUM_MAX_SPEED), PENDULUM_MAX_SPEED)
    new_state = PendulumState(th + new_thdot * dt, new_thdot)
    return new_state, reward, observe(new_state)


@dataclass(frozen=True)
class PendulumStep:
    observation: np.ndarray
    reward: float
    done: bool
    event: str

    @property
    def terminal(self) -> bool:
        return False


class PendulumEnv:
    """Fixed-length episodes from a random initial state; never terminal."""

    def __init__(self, rng: np.random.Generator | None = None) -> None:
        self.rng = rng if rng is not None else np.random.default_rng()
        self.state = PendulumState(math.pi, 0.0)
        self.steps = 0

    def reset(self) -> np.ndarray:
        th = wrap_angle(self.rng.uniform(-math.pi, math.pi))
        self.state = PendulumState(th, self.rng.uniform(-1.0, 1.0))
        self.steps = 0
        return observe(self.state)

    def step(self, action: Sequence[float] | np.ndarray) -> PendulumStep:
        u = float(np.asarray(action).reshape(-1)[0])
        self.state, reward, obs = pendulum_step(self.state, u)
        self.steps += 1
        done = self.steps >= PENDULUM_EPISODE_LENGTH
        return PendulumStep(obs, reward, done, "timeout" if done else "none")


def make_pendulum_agent(
    rng: np.random.Generator,
    hyper: Hyperparams = PENDULUM_HYPERPARAMS,
) -> DDPGAgent:
    """3 -> h -> h -> 1 tanh actor scaled to the torque bound; merged critic."""
    h = hyper.hidden_width
    actor_net = init_params(NetShape((3, h, h, 1), output=Activation.TANH), rng)
    actor = ActorNet(actor_net, np.array([PENDULUM_MAX_TORQUE]))
    critic = CriticNet.build(rng, hidden_width=h, obs_width=3, action_width=1)
    return DDPGAgent(actor, critic, hyper)


def evaluate_pendulum(actor: ActorNet, episodes: int, rng: np.random.Generator) -> float:
    """Mean undiscounted return of the greedy policy."""
    env = PendulumEnv(rng)
    returns = []
    for _ in range(episodes):
        obs = env.reset()
        total, done = 0.0, False
        while not done:
            _, torque = act(actor, obs)
            result = env.step(torque)
            total += result.reward
            obs, done = result.observation, result.done
        returns.append(total)
    return float(np.mean(returns))


@dataclass
class ComparisonReport:
    """Per-seed training curves for both modes plus area-under-curve summaries."""

    curves: dict[str, pd.DataFrame]
    summary: pd.DataFrame

    def write(self, out_dir: str | Path) -> Path:
        path = Path(out_dir)
        path.mkdir(parents=True, exist_ok=True)
        for mode, frame in self.curves.items():
            frame.to_csv(path / f"{mode}.csv", index=False)
        write_toml(
            {"seeds": {str(int(r.seed)): _row_dict(r) for r in self.summary.itertuples()}},
            path / "summary.toml",
        )
        return path


def _row_dict(row) -> dict[str, float]:
    return {k: float(v) for k, v in row._asdict().items() if k not in ("Index", "seed")}


def addpg_vs_ddpg_compare(
    seeds: Sequence[int],
    steps: int,
    hyper: Hyperparams = PENDULUM_HYPERPARAMS,
    noise: NoiseConfig = PENDULUM_NOISE,
    n_samplers: int = 1,
    eval_episodes: int = 0,
) -> ComparisonReport:
    """Train sync (one env step per update) and async agents on the pendulum.

    Args:
        seeds: At least three seeds
        steps: Train iterations per run
        hyper: Agent hyperparameters
        noise: Exploration noise
        n_samplers: Sampler threads in the async runs
        eval_episodes: Greedy evaluation episodes after training (0 skips)

    Returns:
        ComparisonReport with ``sync`` and ``async`` curve frames (columns
        seed, iter, samples, mean_q) and a per-seed summary
    """
    if len(seeds) < 3:
        raise ValueError("at least 3 seeds are required")
    base = RunConfig(total_train_steps=steps, sync_env_steps_per_train=1, n_samplers=n_samplers)
    curves: dict[str, list[pd.DataFrame]] = {"sync": [], "async": []}
    summary = []
    for seed in seeds:
        row: dict[str, float] = {"seed": seed}
        for mode in ("sync", "async"):
            agent = make_pendulum_agent(agent_rng(seed), hyper)
            cfg = replace(base, mode=mode, seed=seed)
            sinks = RunSinks(metrics=MetricsLog(), quiet=True)
            result = run_training(PendulumEnv, agent, cfg, sinks, noise)
            frame = result.metrics[["iter", "samples", "mean_q"]].copy()
            frame.insert(0, "seed", seed)
            curves[mode].append(frame)
            q = frame["mean_q"].to_numpy()
            row[f"{mode}_q_auc"] = float(trapezoid(q)) if len(q) > 1 else 0.0
            row[f"{mode}_samples"] = float(result.counters.samples_collected)
            if eval_episodes:
                row[f"{mode}_eval_return"] = evaluate_pendulum(
                    agent.actor, eval_episodes, np.random.default_rng([seed, 1])
                )
            logger.info("seed %d %s: %s", seed, mode, result.counters.as_dict())
        summary.append(row)
    return ComparisonReport(
        curves={mode: pd.concat(frames, ignore_index=True) for mode, frames in curves.items()},
        summary=pd.DataFrame(summary),
    )
