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
    import marimo as mo

    from mapless_planner import DDPGAgent, Hyperparams, NavigationEnv, RunConfig, load_world
    from mapless_planner.async_runner import RunSinks, agent_rng, run_training

    return (
        DDPGAgent,
        Hyperparams,
        NavigationEnv,
        RunConfig,
        RunSinks,
        agent_rng,
        load_world,
        mo,
        run_training,
    )


@app.cell
def _(mo):
    mo.md(r"""
    # Short Training Run

    A small synchronous DDPG run on one of the bundled worlds. Sync mode is
    reproducible: the same seed always gives the same curve. Real planners
    need hundreds of thousands of iterations; this is for watching the
    machinery, not for getting a good policy.
    """)
    return


@app.cell
def _(mo):
    world_name = mo.ui.dropdown(["env1", "env2"], value="env1", label="World")
    steps = mo.ui.slider(200, 5000, value=1000, step=200, label="Train iterations")
    hidden = mo.ui.dropdown(["16", "32", "64"], value="32", label="Hidden width")
    seed = mo.ui.number(0, 10_000, value=0, label="Seed")
    run = mo.ui.run_button(label="Train")
    return hidden, run, seed, steps, world_name


@app.cell
def _(
    DDPGAgent,
    Hyperparams,
    NavigationEnv,
    RunConfig,
    RunSinks,
    agent_rng,
    hidden,
    load_world,
    mo,
    run,
    run_training,
    seed,
    steps,
    world_name,
):
    mo.stop(not run.value, mo.md("Press **Train** to start."))

    world = load_world(world_name.value)
    hyper = Hyperparams(hidden_width=int(hidden.value), batch_size=32, warmup_steps=200)
    cfg = RunConfig(mode="sync", total_train_steps=steps.value, seed=int(seed.value))
    agent = DDPGAgent.for_navigation(hyper, agent_rng(cfg.seed))

    with mo.status.spinner(title="Training..."):
        result = run_training(
            lambda rng: NavigationEnv(world, rng=rng), agent, cfg, RunSinks(quiet=True)
        )
    return (result,)


@app.cell
def _(mo, result):
    metrics = result.metrics
    counters = result.counters.as_dict()

    def curve_svg(values, width=480, height=160, color="#3b6ea8"):
        finite = values.dropna()
        if len(finite) < 2:
            return "<p>not enough data</p>"
        lo, hi = finite.min(), finite.max()
        span = (hi - lo) or 1.0
        step = width / (len(finite) - 1)
        points = " ".join(
            f"{k * step:.1f},{height - (v - lo) / span * height:.1f}"
            for k, v in enumerate(finite)
        )
        return (
            f'<svg width="{width}" height="{height}" style="background:#fafafa">'
            f'<polyline points="{points}" fill="none" stroke="{color}" stroke-width="1.5"/>'
            "</svg>"
        )

    mo.vstack(
        [
            mo.md(
                f"**{counters['episodes']}** episodes: {counters['arrivals']} arrivals, "
                f"{counters['collisions']} collisions, {counters['timeouts']} timeouts"
            ),
            mo.hstack(
                [
                    mo.vstack([mo.md("Batch mean Q"), mo.Html(curve_svg(metrics["mean_q"]))]),
                    mo.vstack(
                        [
                            mo.md("Mean episode return"),
                            mo.Html(curve_svg(metrics["mean_return"], color="#2e9e5b")),
                        ]
                    ),
                ],
                justify="start",
            ),
            mo.ui.table(metrics, page_size=10),
        ]
    )
    return


@app.cell
def _(hidden, mo, run, seed, steps, world_name):
    mo.hstack([world_name, steps, hidden, seed, run], justify="start")
    return


if __name__ == "__main__":
    app.run()
