"""Shared constants for mapless-planner.

Single source of truth for sensor, robot, reward, training and baseline defaults.
"""

from __future__ import annotations

import math

# =============================================================================
# Lidar
# =============================================================================

DEFAULT_N_BEAMS = 10
DEFAULT_FOV_MIN = -math.pi / 2
DEFAULT_FOV_MAX = math.pi / 2
DEFAULT_MAX_RANGE = 10.0  # meters
DEFAULT_MIN_RANGE = 0.05  # meters

# =============================================================================
# Robot and Episode
# =============================================================================

DEFAULT_ROBOT_RADIUS = 0.18  # Turtlebot-sized collision disc
DEFAULT_V_MAX = 0.5  # m/s
DEFAULT_W_MAX = 1.0  # rad/s
DEFAULT_DT = 0.2  # seconds per control step (5 Hz)
DEFAULT_MAX_STEPS = 500

# Observation: 10 ranges + previous (v, w) + target (distance, angle)
OBSERVATION_WIDTH = DEFAULT_N_BEAMS + 2 + 2
ACTION_WIDTH = 2

# =============================================================================
# Reward
# =============================================================================

DEFAULT_R_ARRIVE = 20.0
DEFAULT_R_COLLISION = -20.0
DEFAULT_C_R = 10.0
DEFAULT_C_D = 0.2  # arrival threshold, meters
DEFAULT_C_O = 0.25  # collision threshold, meters

# =============================================================================
# Networks and Optimizer
# =============================================================================

NAV_HIDDEN_WIDTH = 512
FINAL_LAYER_INIT = 3e-3
DEFAULT_LR = 1e-4
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

# Raw actions are clipped this far inside the open output interval so scaled
# commands stay strictly within (0, v_max) x (-w_max, w_max).
ACTION_EPS = 1e-6

# =============================================================================
# DDPG
# =============================================================================

DEFAULT_GAMMA = 0.99
DEFAULT_TAU = 0.001
DEFAULT_BATCH_SIZE = 64
DEFAULT_BUFFER_CAPACITY = 100_000
DEFAULT_WARMUP_STEPS = 1_000

DEFAULT_OU_THETA = 0.15
DEFAULT_OU_SIGMA = 0.2
DEFAULT_OU_SIGMA_FINAL = 0.05
DEFAULT_OU_DT = 0.05

# =============================================================================
# Runner
# =============================================================================

DEFAULT_N_SAMPLERS = 1
DEFAULT_SNAPSHOT_INTERVAL = 1
DEFAULT_SYNC_ENV_STEPS_PER_TRAIN = 1
DEFAULT_TOTAL_TRAIN_STEPS = 10_000
DEFAULT_CHECKPOINT_INTERVAL = 10_000
PROGRESS_EVERY = 100
RETURN_WINDOW = 100  # episodes averaged into mean_return

METRICS_COLUMNS = ("iter", "samples", "mean_q", "mean_return", "wall_s")

# =============================================================================
# World Sampling
# =============================================================================

MAX_SAMPLE_REJECTIONS = 10_000

# =============================================================================
# Pendulum
# =============================================================================

PENDULUM_G = 10.0
PENDULUM_M = 1.0
PENDULUM_L = 1.0
PENDULUM_DT = 0.05
PENDULUM_MAX_TORQUE = 2.0
PENDULUM_MAX_SPEED = 8.0
PENDULUM_EPISODE_LENGTH = 200
PENDULUM_HIDDEN_WIDTH = 64

# =============================================================================
# GP Baseline
# =============================================================================

DEFAULT_GP_LENGTHSCALE = math.radians(10.0)
DEFAULT_GP_SIGNAL_VAR = 1.0
DEFAULT_GP_NOISE_VAR = 1e-4
DEFAULT_GP_OUT_FOV = math.radians(270.0)
DEFAULT_GP_OUT_BEAMS = 810

# =============================================================================
# Evaluation
# =============================================================================

DEFAULT_EVAL_TRIALS = 5
DEFAULT_LATENCY_QUERIES = 1_000
DEFAULT_FREQUENCY_DURATION = 1.0  # seconds

TRAJECTORY_COLUMNS = (
    "step",
    "t_s",
    "x_m",
    "y_m",
    "theta_rad",
    "v_mps",
    "w_radps",
    "reward",
    "event",
    "target_idx",
    "trial",
)

# =============================================================================
# Checkpoint Format
# =============================================================================

NETWORK_MAGIC = b"MLPN"
NETWORK_FORMAT_VERSION = 1
NETWORK_SUFFIX = ".mlp"
AGENT_SIDECAR = "agent.toml"
