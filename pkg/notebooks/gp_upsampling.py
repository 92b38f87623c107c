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
    import pandas as pd

    from mapless_planner.gp_baseline import (
        GpConfig,
        GpError,
        dense_scan,
        gp_upsample,
        query_angles,
        upsample_error,
    )
    from mapless_planner.sim2d import LidarSpec, RobotState, bundled_world, cast_rays

    return (
        GpConfig,
        GpError,
        LidarSpec,
        RobotState,
        bundled_world,
        cast_rays,
        dense_scan,
        gp_upsample,
        math,
        mo,
        np,
        pd,
        query_angles,
        upsample_error,
    )


@app.cell
def _(mo):
    mo.md(r"""
    # GP Scan Upsampling

    Ten sparse beams over +-90 degrees are stretched to an 810-beam, 270 degree
    scan with RBF Gaussian-process regression. Beams behind the robot are pure
    extrapolation, which is where the upsampled scan goes wrong.
    """)
    return


@app.cell
def _(mo):
    world_name = mo.ui.dropdown(["env1", "env2", "test7x10"], value="env1", label="World")
    x = mo.ui.slider(0.5, 9.5, value=4.5, step=0.1, label="x (m)")
    y = mo.ui.slider(0.5, 9.5, value=4.5, step=0.1, label="y (m)")
    heading = mo.ui.slider(-180, 180, value=30, step=5, label="Heading (deg)")
    lengthscale = mo.ui.slider(2, 60, value=10, step=1, label="Lengthscale (deg)")
    log_noise = mo.ui.slider(-8, 0, value=-4, step=0.5, label="log10 noise variance")
    return heading, lengthscale, log_noise, world_name, x, y


@app.cell
def _(
    GpConfig,
    GpError,
    LidarSpec,
    RobotState,
    bundled_world,
    cast_rays,
    dense_scan,
    gp_upsample,
    heading,
    lengthscale,
    log_noise,
    math,
    np,
    pd,
    query_angles,
    upsample_error,
    world_name,
    x,
    y,
):
    world = bundled_world(world_name.value)
    w_max, h_max = world.bounds
    robot = RobotState(
        min(x.value, w_max - 0.2), min(y.value, h_max - 0.2), math.radians(heading.value)
    )
    lidar = LidarSpec()
    cfg = GpConfig(lengthscale=math.radians(lengthscale.value), noise_var=10.0**log_noise.value)

    angles = lidar.beam_angles()
    sparse = cast_rays(world, (robot.x, robot.y), angles + robot.theta, lidar)
    truth = dense_scan(world, robot, cfg, lidar)
    try:
        predicted = gp_upsample(angles, sparse, cfg)
        error = upsample_error(predicted, truth)
        message = f"RMSE {error['rmse']:.3f} m, worst {error['max_abs']:.3f} m"
    except GpError as exc:
        predicted = np.full_like(truth, np.nan)
        message = str(exc)

    dense = pd.DataFrame(
        {"angle_deg": np.degrees(query_angles(cfg)), "truth_m": truth, "predicted_m": predicted}
    )
    return angles, dense, message, sparse


@app.cell
def _(angles, dense, np, sparse):
    def polar_svg(dense, angles, sparse, size=420, max_range=10.0):
        c = size / 2
        k = c / max_range

        def pt(angle_rad, r):
            return c + k * r * np.sin(-angle_rad), c - k * r * np.cos(angle_rad)

        def line(rows, color):
            points = " ".join(f"{u:.1f},{v:.1f}" for u, v in rows if np.isfinite(u))
            return f'<polyline points="{points}" fill="none" stroke="{color}" stroke-width="1.5"/>'

        rad = np.radians(dense["angle_deg"].to_numpy())
        parts = [f'<svg width="{size}" height="{size}" style="background:#fafafa">']
        parts.append(line([pt(a, r) for a, r in zip(rad, dense["truth_m"])], "#8a8a8a"))
        parts.append(line([pt(a, r) for a, r in zip(rad, dense["predicted_m"])], "#3b6ea8"))
        for a, r in zip(angles, sparse):
            u, v = pt(a, r)
            parts.append(f'<circle cx="{u:.1f}" cy="{v:.1f}" r="4" fill="#e07b39"/>')
        parts.append(f'<circle cx="{c}" cy="{c}" r="5" fill="#222"/>')
        parts.append("</svg>")
        return "".join(parts)

    svg = polar_svg(dense, angles, sparse)
    return (svg,)


@app.cell
def _(dense, heading, lengthscale, log_noise, message, mo, svg, world_name, x, y):
    mo.vstack(
        [
            mo.hstack(
                [
                    mo.vstack([mo.md("**Pose**"), world_name, x, y, heading]),
                    mo.vstack([mo.md("**Kernel**"), lengthscale, log_noise, mo.md(message)]),
                ],
                justify="start",
                gap=2,
            ),
            mo.hstack([mo.Html(svg), mo.ui.table(dense, page_size=12)], justify="start"),
            mo.md("Grey: true 270 degree scan. Blue: GP mean. Orange: the ten input beams."),
        ]
    )
    return


if __name__ == "__main__":
    app.run()
