"""Command-line entry point: ``mapless-planner <command> [options]``.

Every command writes into one output directory, staged next to it and
renamed into place only when the command succeeds.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import shutil
import sys
import tempfile
from collections.abc import Iterator, Sequence
from contextlib import contextmanager
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np
import pandas as pd

from mapless_planner import __version__
from mapless_planner.async_runner import MetricsLog, RunSinks, agent_rng, run_training
from mapless_planner.config import Config, echo_config, parse_config
from mapless_planner.ddpg_agent import ActorNet, DDPGAgent
from mapless_planner.eval_bench import (
    ActorPolicy,
    load_policy,
    load_targets,
    max_control_frequency,
    measure_query_latency,
    run_waypoint_eval,
)
from mapless_planner.gp_baseline import dense_scan, gp_upsample, query_angles, upsample_error
from mapless_planner.pendulum import addpg_vs_ddpg_compare
from mapless_planner.sim2d import (
    BUNDLED_WORLDS,
    NavigationEnv,
    RobotState,
    WorldError,
    WorldSpec,
    cast_rays,
    load_world,
    sample_free_pose,
    world_to_dict,
)
from mapless_planner.utils import write_toml

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunManifest:
    """What a run directory was produced from."""

    command: str
    seed: int
    output_dir: str
    config_path: str = ""
    world_path: str = ""
    mode: str = ""
    n_samplers: int = 0
    steps: int = 0
    version: str = __version__

    def write(self, directory: Path) -> Path:
        return write_toml({"manifest": asdict(self)}, directory / "manifest.toml")


@contextmanager
def staged_output(out: Path, force: bool = False) -> Iterator[Path]:
    """Yield a temporary sibling of ``out``; rename it to ``out`` on success.

    Raises:
        FileExistsError: ``out`` exists and is not empty, and ``force`` is off
    """
    if out.exists() and any(out.iterdir()) and not force:
        raise FileExistsError(f"{out} exists and is not empty; pass --force to replace it")
    out.parent.mkdir(parents=True, exist_ok=True)
    stage = Path(tempfile.mkdtemp(prefix=f".{out.name}-", dir=out.parent))
    try:
        yield stage
    except BaseException:
        shutil.rmtree(stage, ignore_errors=True)
        raise
    if out.exists():
        shutil.rmtree(out)
    os.replace(stage, out)
    logger.info("Wrote %s", out)


def _resolve_config(args: argparse.Namespace) -> Config:
    cfg = parse_config(args.config)
    run = cfg.run
    if args.seed is not None:
        run = replace(run, seed=args.seed)
    if getattr(args, "steps", None) is not None:
        run = replace(run, total_train_steps=args.steps)
    if getattr(args, "mode", None) is not None:
        run = replace(run, mode=args.mode)
    if getattr(args, "samplers", None) is not None:
        run = replace(run, n_samplers=args.samplers)
    return replace(cfg, run=run)


def _save_inputs(stage: Path, cfg: Config, world: WorldSpec | None = None) -> None:
    echo_config(cfg, stage / "config.toml")
    if world is not None:
        text = json.dumps(world_to_dict(world), indent=2)
        (stage / "world.json").write_text(text, encoding="utf-8")


# =============================================================================
# Commands
# =============================================================================


def cmd_train(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    world = load_world(args.world)
    obs_width = cfg.lidar.n_beams + 4
    agent = DDPGAgent.for_navigation(
        cfg.agent, agent_rng(cfg.run.seed), cfg.episode.v_max, cfg.episode.w_max, obs_width
    )

    def make_env(rng: np.random.Generator) -> NavigationEnv:
        return NavigationEnv(
            world, lidar=cfg.lidar, reward=cfg.reward, episode=cfg.episode, rng=rng
        )

    with staged_output(args.out, args.force) as stage:
        _save_inputs(stage, cfg, world)
        sinks = RunSinks(
            metrics=MetricsLog(stage / "metrics.csv"),
            checkpoint_dir=stage / "checkpoints",
            quiet=args.quiet,
        )
        result = run_training(make_env, agent, cfg.run, sinks, cfg.noise)
        counters = result.counters.as_dict()
        if cfg.run.mode == "sync":
            del counters["wall_time"]
        write_toml({"counters": counters}, stage / "counters.toml")
        RunManifest(
            command="train",
            seed=cfg.run.seed,
            output_dir=str(args.out),
            config_path=str(args.config or ""),
            world_path=str(args.world),
            mode=cfg.run.mode,
            n_samplers=cfg.run.n_samplers,
            steps=cfg.run.total_train_steps,
        ).write(stage)
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    world = load_world(args.world)
    targets = args.targets
    if targets is None:
        if str(args.world) not in BUNDLED_WORLDS:
            raise WorldError("--targets is required for a world file")
        targets = str(args.world)
    task = load_targets(targets, world, cfg.eval.trials)
    policy = load_policy(args.checkpoint)

    with staged_output(args.out, args.force) as stage:
        _save_inputs(stage, cfg, world)
        report, trajectory = run_waypoint_eval(task, policy, cfg.episode, cfg.reward, cfg.lidar)
        trajectory.to_csv(stage / "trajectory.csv", index=False)
        report.write(stage)
        RunManifest(
            command="eval",
            seed=cfg.run.seed,
            output_dir=str(args.out),
            config_path=str(args.config or ""),
            world_path=str(args.world),
        ).write(stage)
    return 0


def cmd_pendulum_compare(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    seeds = [cfg.run.seed + k for k in range(args.n_seeds)]
    with staged_output(args.out, args.force) as stage:
        _save_inputs(stage, cfg)
        report = addpg_vs_ddpg_compare(
            seeds,
            cfg.run.total_train_steps,
            n_samplers=cfg.run.n_samplers,
            eval_episodes=args.eval_episodes,
        )
        report.write(stage)
        RunManifest(
            command="pendulum-compare",
            seed=cfg.run.seed,
            output_dir=str(args.out),
            config_path=str(args.config or ""),
            n_samplers=cfg.run.n_samplers,
            steps=cfg.run.total_train_steps,
        ).write(stage)
    return 0


def cmd_gp_demo(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    world = load_world(args.world)
    rng = np.random.default_rng(cfg.run.seed)
    x, y = sample_free_pose(world, rng, max(world.min_clearance, cfg.episode.robot_radius))
    robot = RobotState(x, y, rng.uniform(-np.pi, np.pi), cfg.episode.robot_radius)

    angles = cfg.lidar.beam_angles()
    sparse = cast_rays(world, (robot.x, robot.y), angles + robot.theta, cfg.lidar)
    predicted = gp_upsample(angles, sparse, cfg.gp)
    truth = dense_scan(world, robot, cfg.gp, cfg.lidar)

    with staged_output(args.out, args.force) as stage:
        _save_inputs(stage, cfg, world)
        pd.DataFrame({"angle_deg": np.degrees(angles), "range_m": sparse}).to_csv(
            stage / "sparse.csv", index=False
        )
        pd.DataFrame(
            {"angle_deg": np.degrees(query_angles(cfg.gp)), "range_m": predicted, "truth_m": truth}
        ).to_csv(stage / "dense.csv", index=False)
        error = upsample_error(predicted, truth)
        write_toml(
            {"pose": {"x": robot.x, "y": robot.y, "theta": robot.theta}, "error": error},
            stage / "error.toml",
        )
        RunManifest(
            command="gp-demo",
            seed=cfg.run.seed,
            output_dir=str(args.out),
            config_path=str(args.config or ""),
            world_path=str(args.world),
        ).write(stage)
    logger.info("GP upsampling RMSE %.3f m, max error %.3f m", error["rmse"], error["max_abs"])
    return 0


def cmd_latency(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    if args.checkpoint is not None:
        policy = load_policy(args.checkpoint)
    else:
        actor = ActorNet.navigation(
            agent_rng(cfg.run.seed),
            cfg.agent.hidden_width,
            cfg.episode.v_max,
            cfg.episode.w_max,
            cfg.lidar.n_beams + 4,
        )
        policy = ActorPolicy(actor)
    rng = np.random.default_rng(cfg.run.seed)
    stats = measure_query_latency(policy, cfg.eval.latency_queries, rng)
    frequency = max_control_frequency(policy, cfg.eval.frequency_duration, rng)

    with staged_output(args.out, args.force) as stage:
        _save_inputs(stage, cfg)
        write_toml(
            {
                "latency": {
                    "mean_s": stats.mean,
                    "p99_s": stats.p99,
                    "max_control_frequency_per_min": frequency,
                }
            },
            stage / "latency.toml",
        )
        RunManifest(
            command="latency",
            seed=cfg.run.seed,
            output_dir=str(args.out),
            config_path=str(args.config or ""),
        ).write(stage)
    logger.info("Mean query %.3f ms, p99 %.3f ms", stats.mean * 1e3, stats.p99 * 1e3)
    return 0


# =============================================================================
# Parser
# =============================================================================


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mapless-planner",
        description="Train and evaluate mapless motion planners.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, default_out: str) -> None:
        p.add_argument("--config", type=Path, default=None, help="TOML configuration file")
        p.add_argument("--seed", type=int, default=None, help="override [run].seed")
        p.add_argument("--out", type=Path, default=Path(default_out), help="output directory")
        p.add_argument("--force", action="store_true", help="replace a non-empty --out")
        p.add_argument("--quiet", action="store_true", help="only log warnings and errors")

    def world(p: argparse.ArgumentParser, default: str) -> None:
        p.add_argument(
            "--world",
            default=default,
            help=f"world JSON file or bundled name ({', '.join(BUNDLED_WORLDS)})",
        )

    def run_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--steps", type=int, default=None, help="train iterations")
        mode = p.add_mutually_exclusive_group()
        mode.add_argument("--sync", dest="mode", action="store_const", const="sync")
        mode.add_argument("--async", dest="mode", action="store_const", const="async")
        p.add_argument("--samplers", type=int, default=None, help="async sampler threads")

    train = sub.add_parser("train", help="train a navigation planner")
    common(train, "runs/train")
    world(train, "env1")
    run_flags(train)
    train.set_defaults(func=cmd_train)

    evaluate = sub.add_parser("eval", help="run the waypoint evaluation")
    common(evaluate, "runs/eval")
    world(evaluate, "test7x10")
    evaluate.add_argument("--checkpoint", type=Path, required=True, help="agent checkpoint dir")
    evaluate.add_argument("--targets", default=None, help="target list JSON")
    evaluate.set_defaults(func=cmd_eval)

    compare = sub.add_parser("pendulum-compare", help="async vs sync DDPG on the pendulum")
    common(compare, "runs/pendulum")
    run_flags(compare)
    compare.add_argument("--n-seeds", type=int, default=3, help="consecutive seeds to run")
    compare.add_argument("--eval-episodes", type=int, default=0, help="greedy episodes per run")
    compare.set_defaults(func=cmd_pendulum_compare)

    gp = sub.add_parser("gp-demo", help="upsample one sparse scan with the GP baseline")
    common(gp, "runs/gp")
    world(gp, "env1")
    gp.set_defaults(func=cmd_gp_demo)

    latency = sub.add_parser("latency", help="time actor queries")
    common(latency, "runs/latency")
    latency.add_argument("--checkpoint", type=Path, default=None, help="agent checkpoint dir")
    latency.set_defaults(func=cmd_latency)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (ValueError, RuntimeError, OSError) as exc:
        logger.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
