"""Tests for the pendulum benchmark and the async/sync comparison."""

import math

import numpy as np
import pytest


def _small_hyper():
    from mapless_planner.ddpg_agent import Hyperparams

    return Hyperparams(
        hidden_width=8, batch_size=8, warmup_steps=16, buffer_capacity=1000, lr_actor=1e-3
    )


class TestPendulumStep:
    """Tests for pendulum_step."""

    def test_upright_rest(self):
        """Upright with no torque is a fixed point with zero reward."""
        from mapless_planner.pendulum import PendulumState, pendulum_step

        state, reward, obs = pendulum_step(PendulumState(0.0, 0.0), 0.0)

        assert state == PendulumState(0.0, 0.0)
        assert reward == 0.0
        assert obs.tolist() == [1.0, 0.0, 0.0]

    def test_hanging_rest(self):
        """Hanging down costs pi^2 and sin(pi) leaves the speed at zero."""
        from mapless_planner.pendulum import PendulumState, pendulum_step

        state, reward, _ = pendulum_step(PendulumState(math.pi, 0.0), 0.0)

        assert reward == pytest.approx(-(math.pi**2), abs=1e-12)
        assert state.thdot == pytest.approx(0.0, abs=1e-12)

    def test_hand_arithmetic(self):
        """From (pi/2, 0) with u = 1 the speed becomes (15 + 3) * 0.05."""
        from mapless_planner.pendulum import PendulumState, pendulum_step

        state, reward, obs = pendulum_step(PendulumState(math.pi / 2, 0.0), 1.0)

        assert state.thdot == pytest.approx(0.9, abs=1e-12)
        assert state.th == pytest.approx(math.pi / 2 + 0.045, abs=1e-12)
        assert reward == pytest.approx(-(math.pi**2 / 4 + 0.001), abs=1e-12)
        assert obs[2] == pytest.approx(0.9, abs=1e-12)

    def test_torque_and_speed_clipped(self):
        """Torque beyond 2 acts like 2; speed never leaves [-8, 8]."""
        from mapless_planner.pendulum import PendulumState, pendulum_step

        big, r_big, _ = pendulum_step(PendulumState(0.3, 1.0), 50.0)
        two, r_two, _ = pendulum_step(PendulumState(0.3, 1.0), 2.0)
        assert big == two
        assert r_big == r_two

        state = PendulumState(math.pi / 2, 7.9)
        for _ in range(50):
            state, _, _ = pendulum_step(state, 2.0)
            assert -8.0 <= state.thdot <= 8.0

    def test_reward_never_positive(self):
        """Rewards are <= 0 and finite over random states and torques."""
        from mapless_planner.pendulum import PendulumState, pendulum_step

        rng = np.random.default_rng(0)
        for _ in range(1000):
            s = PendulumState(rng.uniform(-10, 10), rng.uniform(-8, 8))
            state, reward, obs = pendulum_step(s, rng.uniform(-3, 3))
            assert reward <= 0.0
            assert np.all(np.isfinite(obs))

    def test_pure_function(self):
        """The same state and torque always give the same result."""
        from mapless_planner.pendulum import PendulumState, pendulum_step

        a = pendulum_step(PendulumState(1.0, -2.0), 0.7)
        b = pendulum_step(PendulumState(1.0, -2.0), 0.7)

        assert a[0] == b[0] and a[1] == b[1]
        assert a[2].tolist() == b[2].tolist()


class TestPendulumEnv:
    """Tests for the episode wrapper."""

    def test_fixed_length_never_terminal(self):
        """Episodes last 200 steps and end as timeouts."""
        from mapless_planner.pendulum import PendulumEnv

        env = PendulumEnv(np.random.default_rng(1))
        env.reset()
        for k in range(200):
            result = env.step([0.0])
            assert not result.terminal
            assert result.done == (k == 199)
        assert result.event == "timeout"

    def test_reset_distribution(self):
        """Initial angle in (-pi, pi] and speed in (-1, 1)."""
        from mapless_planner.pendulum import PendulumEnv

        env = PendulumEnv(np.random.default_rng(2))
        for _ in range(200):
            env.reset()
            assert -math.pi < env.state.th <= math.pi
            assert -1.0 < env.state.thdot < 1.0

    def test_agent_shapes(self):
        """The actor is 3 -> h -> h -> 1 with a tanh head scaled by 2."""
        from mapless_planner.pendulum import make_pendulum_agent
        from mapless_planner.tensor_nn import Activation

        agent = make_pendulum_agent(np.random.default_rng(0), _small_hyper())

        assert [layer.W.shape for layer in agent.actor.net.layers] == [(8, 3), (8, 8), (1, 8)]
        assert agent.actor.net.layers[-1].act == Activation.TANH
        assert agent.actor.scale.tolist() == [2.0]
        assert agent.critic.net.aux_width == 1


class TestCompare:
    """Tests for addpg_vs_ddpg_compare."""

    def test_needs_three_seeds(self):
        """Fewer than three seeds is refused."""
        from mapless_planner.pendulum import addpg_vs_ddpg_compare

        with pytest.raises(ValueError, match="3 seeds"):
            addpg_vs_ddpg_compare([0, 1], steps=5)

    def test_report_shape(self, tmp_path):
        """Both curves have one row per train step per seed; the summary has AUCs."""
        from mapless_planner.pendulum import addpg_vs_ddpg_compare

        report = addpg_vs_ddpg_compare([0, 1, 2], steps=6, hyper=_small_hyper())

        for mode in ("sync", "async"):
            frame = report.curves[mode]
            assert list(frame.columns) == ["seed", "iter", "samples", "mean_q"]
            assert len(frame) == 18
            assert frame.groupby("seed")["iter"].apply(list).tolist() == [list(range(1, 7))] * 3
        assert report.summary["seed"].tolist() == [0, 1, 2]
        assert {"sync_q_auc", "async_q_auc", "sync_samples", "async_samples"} <= set(
            report.summary.columns
        )

        out = report.write(tmp_path / "compare")
        assert sorted(p.name for p in out.iterdir()) == ["async.csv", "summary.toml", "sync.csv"]

    def test_sync_curve_is_one_sample_per_step(self):
        """Sync samples grow by exactly one per train iteration."""
        from mapless_planner.pendulum import addpg_vs_ddpg_compare

        report = addpg_vs_ddpg_compare([3, 4, 5], steps=10, hyper=_small_hyper())

        for _, frame in report.curves["sync"].groupby("seed"):
            assert np.diff(frame["samples"].to_numpy()).tolist() == [1] * 9
            assert frame["samples"].iloc[0] == 16

    @pytest.mark.slow
    def test_async_samples_dominate(self):
        """The async samples curve lies on or above the sync curve at every iteration."""
        from mapless_planner.pendulum import addpg_vs_ddpg_compare

        report = addpg_vs_ddpg_compare([0, 1, 2], steps=2000)

        for seed in (0, 1, 2):
            sync = report.curves["sync"].query("seed == @seed")["samples"].to_numpy()
            asyn = report.curves["async"].query("seed == @seed")["samples"].to_numpy()
            assert np.all(asyn >= sync)
            assert asyn[-1] / 2000 > 1.0

    @pytest.mark.slow
    def test_learning(self):
        """Mean batch Q rises and the greedy return beats -400 for both modes."""
        from mapless_planner.pendulum import addpg_vs_ddpg_compare

        steps = 50_000
        report = addpg_vs_ddpg_compare([0, 1, 2], steps=steps, eval_episodes=10)

        tenth = steps // 10
        for mode in ("sync", "async"):
            for _, frame in report.curves[mode].groupby("seed"):
                q = frame["mean_q"].to_numpy()
                assert q[-tenth:].mean() > q[:tenth].mean()
            assert np.all(report.summary[f"{mode}_eval_return"] >= -400.0)
