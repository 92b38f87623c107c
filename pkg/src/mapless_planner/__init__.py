"""mapless-planner - Mapless motion planning with asynchronous DDPG."""

from mapless_planner.async_runner import RunConfig, run_training
from mapless_planner.config import Config, parse_config
from mapless_planner.ddpg_agent import DDPGAgent, Hyperparams, NoiseConfig, act
from mapless_planner.eval_bench import load_policy, load_targets, run_waypoint_eval
from mapless_planner.export import export_network, load_network
from mapless_planner.gp_baseline import GpConfig, gp_upsample
from mapless_planner.sim2d import NavigationEnv, WorldSpec, load_world

__all__ = [
    "Config",
    "DDPGAgent",
    "GpConfig",
    "Hyperparams",
    "NavigationEnv",
    "NoiseConfig",
    "RunConfig",
    "WorldSpec",
    "act",
    "export_network",
    "gp_upsample",
    "load_network",
    "load_policy",
    "load_targets",
    "load_world",
    "parse_config",
    "run_training",
    "run_waypoint_eval",
]
__version__ = "0.1.0"
