# /// script
# requires-python = ">=3.10"
# dependencies = [
#     "marimo>=0.19.7",
#     "mapless-planner",
# ]
# ///
import marimo

__generated_with = "0.19.6"
app = marimo.App(width="medium")


@app.cell
def _():
    import math

    import marimo as mo
    import numpy as np

    from mapless_planner.ddpg_agent import ActorNet, act
    from mapless_planner.sim2d import (
        LidarSpec,
        NavigationEnv,
        RobotState,
        bundled_world,
        cast_rays,
    )

    return (
        ActorNet,
        LidarSpec,
        NavigationEnv,
        RobotState,
        act,
        bundled_world,
        cast_rays,
        math,
        mo,
        np,
    )


@app.cell
def _(mo):
    mo.md(r"""
    # Mapless Navigation

    Place the robot in one of the bundled worlds and look at what the planner
    sees: ten lidar beams over the front half-plane plus the target's distance
    and bearing. Roll out an untrained actor to watch a trajectory.
    """)
    return


@app.cell
def _(mo):
    world_name = mo.ui.dropdown(["env1", "env2", "test7x10"], value="env1", label="World")
    x = mo.ui.slider(0.5, 9.5, value=5.0, step=0.1, label="x (m)")
    y = mo.ui.slider(0.5, 9.5, value=5.0, step=0.1, label="y (m)")
    heading = mo.ui.slider(-180, 180, value=0, step=5, label="Heading (deg)")
    target_x = mo.ui.slider(0.5, 9.5, value=8.5, step=0.1, label="Target x (m)")
    target_y = mo.ui.slider(0.5, 9.5, value=4.0, step=0.1, label="Target y (m)")
    rollout_steps = mo.ui.slider(0, 300, value=0, step=10, label="Rollout steps")
    seed = mo.ui.number(0, 10_000, value=0, label="Actor seed")
    return heading, rollout_steps, seed, target_x, target_y, world_name, x, y


@app.cell
def _(
    ActorNet,
    NavigationEnv,
    RobotState,
    act,
    bundled_world,
    heading,
    math,
    np,
    rollout_steps,
    seed,
    target_x,
    target_y,
    world_name,
    x,
    y,
):
    world = bundled_world(world_name.value)
    w_max, h_max = world.bounds
    robot = RobotState(
        min(x.value, w_max - 0.2), min(y.value, h_max - 0.2), math.radians(heading.value)
    )
    target = (min(target_x.value, w_max - 0.2), min(target_y.value, h_max - 0.2))

    env = NavigationEnv(world, rng=np.random.default_rng(0))
    obs = env.reset(start=robot, target=target)
    actor = ActorNet.navigation(np.random.default_rng(int(seed.value)), hidden_width=64)

    path = [(robot.x, robot.y)]
    outcome = "not run"
    for _ in range(rollout_steps.value):
        result = env.step(act(actor, obs)[1])
        path.append((env.robot.x, env.robot.y))
        obs = result.observation
        if result.done:
            outcome = result.event.value
            break
    return env, obs, outcome, path, robot, target, world


@app.cell
def _(LidarSpec, cast_rays, math, path, robot, target, world):
    def render_svg(world, robot, target, path, scale=50):
        w, h = world.bounds
        spec = LidarSpec()

        def px(p):
            return p[0] * scale, (h - p[1]) * scale

        def pts(points):
            return " ".join(f"{u:.1f},{v:.1f}" for u, v in map(px, points))

        parts = [
            f'<svg width="{w * scale:.0f}" height="{h * scale:.0f}" '
            'style="background:#fafafa;border:1px solid #999">'
        ]
        for poly in world.obstacles:
            parts.append(f'<polygon points="{pts(poly)}" fill="#8a8a8a"/>')

        # Lidar beams
        rx, ry = px(robot.position)
        angles = spec.beam_angles() + robot.theta
        ranges = cast_rays(world, (robot.x, robot.y), angles, spec)
        for a, r in zip(angles, ranges):
            ex, ey = px((robot.x + r * math.cos(a), robot.y + r * math.sin(a)))
            parts.append(
                f'<line x1="{rx:.1f}" y1="{ry:.1f}" x2="{ex:.1f}" y2="{ey:.1f}" '
                'stroke="#e07b39" stroke-width="1"/>'
            )
        if len(path) > 1:
            parts.append(
                f'<polyline points="{pts(path)}" fill="none" stroke="#3b6ea8" stroke-width="2"/>'
            )
        parts.append(
            f'<circle cx="{rx:.1f}" cy="{ry:.1f}" r="{robot.radius * scale:.1f}" fill="#3b6ea8"/>'
        )
        tx, ty = px(target)
        parts.append(f'<circle cx="{tx:.1f}" cy="{ty:.1f}" r="6" fill="#2e9e5b"/>')
        parts.append("</svg>")
        return "".join(parts)

    svg = render_svg(world, robot, target, path)
    return (svg,)


@app.cell
def _(
    heading,
    mo,
    obs,
    outcome,
    rollout_steps,
    seed,
    svg,
    target_x,
    target_y,
    world_name,
    x,
    y,
):
    ranges = ", ".join(f"{r:.2f}" for r in obs.ranges)
    distance, bearing = obs.target_polar
    mo.hstack(
        [
            mo.vstack(
                [
                    mo.md("**Scene**"),
                    world_name,
                    x,
                    y,
                    heading,
                    target_x,
                    target_y,
                    mo.md("**Rollout**"),
                    rollout_steps,
                    seed,
                ]
            ),
            mo.vstack(
                [
                    mo.Html(svg),
                    mo.md(
                        f"Normalized ranges: `{ranges}`  \n"
                        f"Target: {distance:.2f} m at {bearing:+.2f} rad  \n"
                        f"Rollout outcome: **{outcome}**"
                    ),
                ]
            ),
        ],
        justify="start",
        gap=2,
    )
    return


if __name__ == "__main__":
    app.run()
