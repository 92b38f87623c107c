"""DDPG actor/critic, replay memory, OU exploration and the update equations."""

from __future__ import annotations

import logging
import threading
from collections.abc import Sequence
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from mapless_planner.constants import (
    ACTION_EPS,
    ACTION_WIDTH,
    AGENT_SIDECAR,
    DEFAULT_BATCH_SIZE,
    DEFAULT_BUFFER_CAPACITY,
    DEFAULT_GAMMA,
    DEFAULT_LR,
    DEFAULT_OU_DT,
    DEFAULT_OU_SIGMA,
    DEFAULT_OU_SIGMA_FINAL,
    DEFAULT_OU_THETA,
    DEFAULT_TAU,
    DEFAULT_V_MAX,
    DEFAULT_W_MAX,
    DEFAULT_WARMUP_STEPS,
    NAV_HIDDEN_WIDTH,
    OBSERVATION_WIDTH,
)
from mapless_planner.export import CheckpointError, export_network, load_network
from mapless_planner.tensor_nn import (
    Activation,
    AdamState,
    DivergenceError,
    Mlp,
    NetShape,
    adam_step,
    init_params,
    mlp_backward,
    mlp_forward,
)
from mapless_planner.utils import as_vector, read_toml, write_toml

logger = logging.getLogger(__name__)

_RAW_BOUNDS = {
    Activation.SIGMOID: (0.0, 1.0),
    Activation.TANH: (-1.0, 1.0),
    Activation.RELU: (0.0, np.inf),
    Activation.LINEAR: (-np.inf, np.inf),
}


class BufferNotReadyError(RuntimeError):
    """Not enough transitions to sample yet; the trainer should idle."""


# =============================================================================
# Configuration
# =============================================================================


@dataclass(frozen=True)
class Hyperparams:
    gamma: float = DEFAULT_GAMMA
    tau: float = DEFAULT_TAU
    lr_actor: float = DEFAULT_LR
    lr_critic: float = DEFAULT_LR
    batch_size: int = DEFAULT_BATCH_SIZE
    buffer_capacity: int = DEFAULT_BUFFER_CAPACITY
    warmup_steps: int = DEFAULT_WARMUP_STEPS
    hidden_width: int = NAV_HIDDEN_WIDTH

    def __post_init__(self) -> None:
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must be in (0, 1]")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError("tau must be in (0, 1]")
        if self.lr_actor < 0.0 or self.lr_critic < 0.0:
            raise ValueError("lr_actor and lr_critic must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.buffer_capacity < 1:
            raise ValueError("buffer_capacity must be >= 1")
        if self.warmup_steps < 0:
            raise ValueError("warmup_steps must be >= 0")
        if max(self.batch_size, self.warmup_steps) > self.buffer_capacity:
            raise ValueError("batch_size and warmup_steps must not exceed buffer_capacity")
        if self.hidden_width < 1:
            raise ValueError("hidden_width must be >= 1")


@dataclass(frozen=True)
class NoiseConfig:
    theta: float = DEFAULT_OU_THETA
    sigma: float = DEFAULT_OU_SIGMA
    sigma_final: float = DEFAULT_OU_SIGMA_FINAL
    dt: float = DEFAULT_OU_DT
    mu: float = 0.0

    def __post_init__(self) -> None:
        if self.theta < 0.0:
            raise ValueError("theta must be >= 0")
        if self.sigma < 0.0 or self.sigma_final < 0.0:
            raise ValueError("sigma and sigma_final must be >= 0")
        if not self.dt > 0.0:
            raise ValueError("dt must be > 0")

    def sigma_at(self, progress: float) -> float:
        """Linearly decayed sigma at training progress in [0, 1]."""
        p = min(max(progress, 0.0), 1.0)
        return self.sigma + (self.sigma_final - self.sigma) * p


# =============================================================================
# Networks
# =============================================================================


@dataclass
class ActorNet:
    """Deterministic policy; raw outputs are bounded by the output activations."""

    net: Mlp
    scale: np.ndarray

    def __post_init__(self) -> None:
        self.scale = np.asarray(self.scale, dtype=np.float64)
        if self.scale.shape != (self.net.out_width,):
            raise ValueError("scale must have one entry per action unit")

    @classmethod
    def navigation(
        cls,
        rng: np.random.Generator,
        hidden_width: int = NAV_HIDDEN_WIDTH,
        v_max: float = DEFAULT_V_MAX,
        w_max: float = DEFAULT_W_MAX,
        obs_width: int = OBSERVATION_WIDTH,
    ) -> ActorNet:
        """14 -> h -> h -> h -> (sigmoid linear velocity, tanh angular velocity)."""
        shape = NetShape(
            sizes=(obs_width, hidden_width, hidden_width, hidden_width, ACTION_WIDTH),
            output=(Activation.SIGMOID, Activation.TANH),
        )
        return cls(init_params(shape, rng), np.array([v_max, w_max]))

    def raw_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        act = self.net.layers[-1].act
        acts = (act,) * self.net.out_width if isinstance(act, Activation) else act
        low = np.array([_RAW_BOUNDS[a][0] for a in acts])
        high = np.array([_RAW_BOUNDS[a][1] for a in acts])
        return low, high

    def forward(self, states: np.ndarray) -> np.ndarray:
        return mlp_forward(self.net, states)[0]

    def copy(self) -> ActorNet:
        return ActorNet(self.net.copy(), self.scale.copy())


@dataclass
class CriticNet:
    """Q(s, a) with the action merged into the second layer."""

    net: Mlp

    @classmethod
    def build(
        cls,
        rng: np.random.Generator,
        hidden_width: int = NAV_HIDDEN_WIDTH,
        obs_width: int = OBSERVATION_WIDTH,
        action_width: int = ACTION_WIDTH,
    ) -> CriticNet:
        shape = NetShape(
            sizes=(obs_width, hidden_width, hidden_width, 1),
            output=Activation.LINEAR,
            merge_point=1,
            aux_width=action_width,
        )
        return cls(init_params(shape, rng))

    def q(self, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
        return mlp_forward(self.net, states, actions)[0].reshape(-1)

    def copy(self) -> CriticNet:
        return CriticNet(self.net.copy())


# =============================================================================
# Exploration
# =============================================================================


@dataclass
class OUNoise:
    """Ornstein-Uhlenbeck process, one component per action unit."""

    state: np.ndarray
    theta: float = DEFAULT_OU_THETA
    sigma: float = DEFAULT_OU_SIGMA
    mu: float = 0.0
    dt: float = DEFAULT_OU_DT

    @classmethod
    def from_config(cls, cfg: NoiseConfig, width: int = ACTION_WIDTH) -> OUNoise:
        return cls(np.full(width, cfg.mu), cfg.theta, cfg.sigma, cfg.mu, cfg.dt)

    def reset(self) -> None:
        self.state = np.full_like(self.state, self.mu)


def ou_step(noise: OUNoise, rng: np.random.Generator) -> np.ndarray:
    """Advance the process one step and return the new state."""
    drift = noise.theta * (noise.mu - noise.state) * noise.dt
    diffusion = noise.sigma * np.sqrt(noise.dt) * rng.standard_normal(noise.state.shape)
    noise.state = noise.state + drift + diffusion
    return noise.state.copy()


def act(
    actor: ActorNet,
    obs: Any,
    noise: OUNoise | None = None,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Policy query returning (raw network action, scaled command).

    Noise is added in raw space; the result is clipped just inside the output
    activation's range so scaled commands never reach the velocity limits.
    """
    raw = actor.forward(as_vector(obs))
    if noise is not None:
        if rng is None:
            raise ValueError("exploration noise needs an rng")
        raw = raw + ou_step(noise, rng)
    low, high = actor.raw_bounds()
    raw = np.clip(raw, low + ACTION_EPS, high - ACTION_EPS)
    return raw, raw * actor.scale


# =============================================================================
# Replay
# =============================================================================


@dataclass
class Transition:
    s: np.ndarray
    a: np.ndarray
    r: float
    s_next: np.ndarray
    done: bool


@dataclass
class Batch:
    s: np.ndarray
    a: np.ndarray
    r: np.ndarray
    s_next: np.ndarray
    done: np.ndarray

    def __len__(self) -> int:
        return len(self.r)

    @classmethod
    def from_transitions(cls, items: Sequence[Transition]) -> Batch:
        return cls(
            s=np.stack([as_vector(t.s) for t in items]),
            a=np.stack([np.asarray(t.a, dtype=np.float64) for t in items]),
            r=np.array([t.r for t in items], dtype=np.float64),
            s_next=np.stack([as_vector(t.s_next) for t in items]),
            done=np.array([t.done for t in items], dtype=np.float64),
        )


class ReplayBuffer:
    """Fixed-capacity ring of transitions with uniform sampling.

    push/sample hold the lock only while copying rows in or out.
    """

    def __init__(self, capacity: int, obs_width: int, action_width: int) -> None:
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._s = np.zeros((capacity, obs_width))
        self._a = np.zeros((capacity, action_width))
        self._r = np.zeros(capacity)
        self._s_next = np.zeros((capacity, obs_width))
        self._done = np.zeros(capacity)
        self.cursor = 0
        self.size = 0
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return self.size

    def push(self, t: Transition) -> None:
        s, s_next = as_vector(t.s), as_vector(t.s_next)
        with self._lock:
            i = self.cursor
            self._s[i] = s
            self._a[i] = t.a
            self._r[i] = t.r
            self._s_next[i] = s_next
            self._done[i] = float(t.done)
            self.cursor = (i + 1) % self.capacity
            self.size = min(self.size + 1, self.capacity)

    def ready(self, n: int, warmup: int = 0) -> bool:
        return self.size >= max(n, warmup)

    def sample(self, n: int, rng: np.random.Generator, warmup: int = 0) -> Batch:
        """Draw ``n`` transitions uniformly with replacement."""
        with self._lock:
            if not self.ready(n, warmup):
                raise BufferNotReadyError(f"{self.size} transitions stored, need {max(n, warmup)}")
            idx = rng.integers(0, self.size, size=n)
            return Batch(
                self._s[idx], self._a[idx], self._r[idx], self._s_next[idx], self._done[idx]
            )

    def transitions(self) -> list[Transition]:
        """Stored transitions, oldest first."""
        with self._lock:
            start = self.cursor if self.size == self.capacity else 0
            order = [(start + k) % self.capacity for k in range(self.size)]
            return [
                Transition(
                    self._s[i].copy(),
                    self._a[i].copy(),
                    float(self._r[i]),
                    self._s_next[i].copy(),
                    bool(self._done[i]),
                )
                for i in order
            ]


def buffer_push(buf: ReplayBuffer, t: Transition) -> None:
    buf.push(t)


def buffer_sample(buf: ReplayBuffer, n: int, rng: np.random.Generator, warmup: int = 0) -> Batch:
    return buf.sample(n, rng, warmup)


# =============================================================================
# Updates
# =============================================================================


def bellman_targets(
    critic_target: CriticNet,
    actor_target: ActorNet,
    batch: Batch,
    gamma: float,
) -> np.ndarray:
    """y = r + gamma * (1 - done) * Q'(s', mu'(s'))."""
    if len(batch) == 0:
        raise ValueError("empty batch")
    next_actions = actor_target.forward(batch.s_next)
    q_next = critic_target.q(batch.s_next, next_actions)
    return batch.r + gamma * (1.0 - batch.done) * q_next


def critic_update(critic: CriticNet, batch: Batch, y: np.ndarray, optimizer: AdamState) -> float:
    """One Adam step on the mean squared Bellman error; returns the pre-step loss."""
    q, cache = mlp_forward(critic.net, batch.s, batch.a)
    diff = q.reshape(-1) - y
    loss = float(np.mean(diff * diff))
    if not np.isfinite(loss):
        raise DivergenceError(f"critic loss is {loss}")
    grad_q = (2.0 / len(diff)) * diff[:, None]
    grads, _, _ = mlp_backward(critic.net, cache, grad_q)
    adam_step(critic.net.params(), grads, optimizer)
    critic.net.touch()
    return loss


def actor_update(actor: ActorNet, critic: CriticNet, batch: Batch, optimizer: AdamState) -> float:
    """One Adam ascent step on mean Q(s, mu(s)); returns the pre-step mean Q."""
    if len(batch) == 0:
        raise ValueError("empty batch")
    actions, actor_cache = mlp_forward(actor.net, batch.s)
    q, critic_cache = mlp_forward(critic.net, batch.s, actions)
    mean_q = float(np.mean(q))
    grad_q = np.full_like(q, -1.0 / len(q))
    _, _, grad_actions = mlp_backward(critic.net, critic_cache, grad_q)
    grads, _, _ = mlp_backward(actor.net, actor_cache, grad_actions)
    adam_step(actor.net.params(), grads, optimizer)
    actor.net.touch()
    return mean_q


def soft_update(
    target_params: Sequence[np.ndarray],
    online_params: Sequence[np.ndarray],
    tau: float,
) -> Sequence[np.ndarray]:
    """target <- tau * online + (1 - tau) * target, in place."""
    if len(target_params) != len(online_params):
        raise ValueError("parameter lists differ in length")
    for t, o in zip(target_params, online_params):
        if t.shape != o.shape:
            raise ValueError(f"shape mismatch {t.shape} / {o.shape}")
        t *= 1.0 - tau
        t += tau * o
    return target_params


# =============================================================================
# Agent
# =============================================================================


@dataclass
class TrainStats:
    critic_loss: float
    mean_q: float


@dataclass
class DDPGAgent:
    """Online and target networks, their optimizers and the update schedule."""

    actor: ActorNet
    critic: CriticNet
    hyper: Hyperparams = field(default_factory=Hyperparams)
    actor_target: ActorNet | None = None
    critic_target: CriticNet | None = None
    train_steps: int = 0

    def __post_init__(self) -> None:
        if self.actor_target is None:
            self.actor_target = self.actor.copy()
        if self.critic_target is None:
            self.critic_target = self.critic.copy()
        self.actor_opt = AdamState.zeros_like(self.actor.net.params(), self.hyper.lr_actor)
        self.critic_opt = AdamState.zeros_like(self.critic.net.params(), self.hyper.lr_critic)

    @classmethod
    def for_navigation(
        cls,
        hyper: Hyperparams,
        rng: np.random.Generator,
        v_max: float = DEFAULT_V_MAX,
        w_max: float = DEFAULT_W_MAX,
        obs_width: int = OBSERVATION_WIDTH,
    ) -> DDPGAgent:
        actor = ActorNet.navigation(rng, hyper.hidden_width, v_max, w_max, obs_width)
        critic = CriticNet.build(rng, hyper.hidden_width, obs_width, ACTION_WIDTH)
        return cls(actor, critic, hyper)

    def train_step(self, batch: Batch) -> TrainStats:
        """Critic regression, policy ascent, then both soft target updates."""
        y = bellman_targets(self.critic_target, self.actor_target, batch, self.hyper.gamma)
        loss = critic_update(self.critic, batch, y, self.critic_opt)
        mean_q = actor_update(self.actor, self.critic, batch, self.actor_opt)
        soft_update(self.critic_target.net.params(), self.critic.net.params(), self.hyper.tau)
        soft_update(self.actor_target.net.params(), self.actor.net.params(), self.hyper.tau)
        self.critic_target.net.touch()
        self.actor_target.net.touch()
        self.train_steps += 1
        return TrainStats(loss, mean_q)

    def save(self, directory: str | Path) -> Path:
        """Write the four networks plus a TOML sidecar into ``directory``."""
        path = Path(directory)
        path.mkdir(parents=True, exist_ok=True)
        export_network(self.actor.net, path / "actor")
        export_network(self.critic.net, path / "critic")
        export_network(self.actor_target.net, path / "actor_target")
        export_network(self.critic_target.net, path / "critic_target")
        write_toml(
            {
                "train_steps": self.train_steps,
                "actor_scale": self.actor.scale.tolist(),
                "hyperparams": asdict(self.hyper),
            },
            path / AGENT_SIDECAR,
        )
        logger.debug("Saved agent checkpoint to %s", path)
        return path

    @classmethod
    def load(cls, directory: str | Path) -> DDPGAgent:
        path = Path(directory)
        try:
            meta = read_toml(path / AGENT_SIDECAR)
            scale = np.asarray(meta["actor_scale"], dtype=np.float64)
            hyper = Hyperparams(**meta["hyperparams"])
            train_steps = int(meta["train_steps"])
        except (OSError, KeyError, TypeError, ValueError) as exc:
            raise CheckpointError(f"cannot read agent sidecar in {path}: {exc}") from exc
        return cls(
            actor=ActorNet(load_network(path / "actor.mlp"), scale),
            critic=CriticNet(load_network(path / "critic.mlp")),
            hyper=hyper,
            actor_target=ActorNet(load_network(path / "actor_target.mlp"), scale.copy()),
            critic_target=CriticNet(load_network(path / "critic_target.mlp")),
            train_steps=train_steps,
        )


def load_actor(directory: str | Path) -> ActorNet:
    """Load only the online actor of an agent checkpoint."""
    path = Path(directory)
    try:
        meta = read_toml(path / AGENT_SIDECAR)
        scale = np.asarray(meta["actor_scale"], dtype=np.float64)
    except (OSError, KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"cannot read agent sidecar in {path}: {exc}") from exc
    return ActorNet(load_network(path / "actor.mlp"), scale)
