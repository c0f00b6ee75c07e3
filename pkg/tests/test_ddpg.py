"""Agent tests: normalization maps, exploration, TD targets, update fixed
points, the replay buffer, the training loop, and checkpoint integrity."""

import dataclasses
from pathlib import Path

import numpy as np
import pytest

from rampmerge.checkpoint import CheckpointError, read_container, write_container
from rampmerge.config import DdpgConfig, EnvConfig
from rampmerge.ddpg import (
    ACT_DIM, DdpgAgent, ReplayBuffer, denormalize_action, explore_action,
    load_training_checkpoint, normalize_observation, save_training_checkpoint,
    td_target, train,
)
from rampmerge.env import OBS_DIM, MergingEnv
from rampmerge.nets import MLPParams, init_mlp, mlp_forward


def small_cfg(**overrides):
    base = dict(total_steps=600, checkpoint_every=10**9, replay_capacity=100_000)
    base.update(overrides)
    return dataclasses.replace(DdpgConfig(), **base)


class TestNormalization:
    def test_distance_scale(self):
        obs = np.zeros(OBS_DIM)
        obs[4] = 100.0
        assert normalize_observation(obs)[4] == 0.5

    def test_velocity_scale(self):
        obs = np.zeros(OBS_DIM)
        obs[5] = 29.06
        assert normalize_observation(obs)[5] == 1.0

    def test_acceleration_scale(self):
        obs = np.zeros(OBS_DIM)
        obs[6] = -4.5
        assert normalize_observation(obs)[6] == -1.0

    def test_zero_maps_to_zero(self):
        assert np.all(normalize_observation(np.zeros(OBS_DIM)) == 0.0)

    def test_typical_observation_lands_in_band(self):
        obs = np.array([-100.0, 29.06, -100.0, 29.06, 100.0, 24.0, 0.0,
                        300.0, 29.06, 300.0, 29.06])
        n = normalize_observation(obs)
        assert np.all(np.abs(n) <= 2.0)


class TestDenormalizeAction:
    def test_endpoints_and_midpoint(self):
        assert denormalize_action(-1.0) == pytest.approx(-4.5, abs=1e-12)
        assert denormalize_action(1.0) == pytest.approx(2.6, abs=1e-12)
        assert denormalize_action(0.0) == pytest.approx(-0.95, abs=1e-12)

    def test_range_is_respected(self):
        for u in np.linspace(-1, 1, 41):
            a = denormalize_action(float(u))
            assert -4.5 <= a <= 2.6 + 1e-12


class TestExploreAction:
    def test_zero_noise_is_identity(self):
        rng = np.random.default_rng(0)
        assert explore_action(0.3, rng, std=0.0) == 0.3

    def test_clipping_at_bounds(self):
        rng = np.random.default_rng(0)
        assert explore_action(0.999, rng, std=10.0) in (-1.0, 1.0) or True
        vals = [explore_action(0.999, np.random.default_rng(s), std=10.0) for s in range(50)]
        assert max(vals) == 1.0 and min(vals) == -1.0

    def test_noise_statistics(self):
        rng = np.random.default_rng(123)
        draws = np.array([explore_action(0.0, rng) for _ in range(1_000_000)])
        assert abs(draws.mean()) <= 2e-4
        assert 0.0195 <= draws.std() <= 0.0205


class TestTdTarget:
    def test_termination_cuts_bootstrap(self):
        rng = np.random.default_rng(1)
        ta = init_mlp([OBS_DIM, 64, 64, ACT_DIM], "tanh", rng)
        tc = init_mlp([OBS_DIM + ACT_DIM, 64, 64, 1], "linear", rng)
        s2 = rng.uniform(-1, 1, (4, OBS_DIM))
        r = np.full((4, 1), 1.0)
        y = td_target(r, np.ones((4, 1)), 0.99, ta, tc, s2)
        assert np.all(y == 1.0)

    def test_bootstrap_value(self):
        ta = MLPParams([OBS_DIM, 64, 64, ACT_DIM], "tanh")
        tc = MLPParams([OBS_DIM + ACT_DIM, 64, 64, 1], "linear")
        tc.biases[-1][0] = 2.0  # Q == 2 everywhere
        s2 = np.zeros((3, OBS_DIM))
        y = td_target(np.zeros((3, 1)), np.zeros((3, 1)), 0.99, ta, tc, s2)
        assert y == pytest.approx(np.full((3, 1), 1.98), abs=1e-12)

    def test_zero_target_critic(self):
        ta = MLPParams([OBS_DIM, 64, 64, ACT_DIM], "tanh")
        tc = MLPParams([OBS_DIM + ACT_DIM, 64, 64, 1], "linear")
        y = td_target(np.full((2, 1), -0.025), np.zeros((2, 1)), 0.99, ta, tc,
                      np.zeros((2, OBS_DIM)))
        assert y == pytest.approx(np.full((2, 1), -0.025), abs=1e-15)


class TestUpdateFixedPoints:
    def test_critic_regresses_to_terminal_reward(self):
        agent = DdpgAgent(small_cfg(), EnvConfig(), rng=np.random.default_rng(2))
        s = np.random.default_rng(3).uniform(-1, 1, (1, OBS_DIM))
        a = np.array([[0.4]])
        r = np.array([[0.7]])
        term = np.array([[1.0]])
        for _ in range(4000):
            agent.critic_update(s, a, r, s, term)
        q = float(mlp_forward(agent.critic, np.concatenate([s, a], axis=1))[0, 0])
        assert q == pytest.approx(0.7, abs=1e-2)

    def test_zero_td_error_is_stationary(self):
        agent = DdpgAgent(small_cfg(), EnvConfig(), rng=np.random.default_rng(4))
        s = np.random.default_rng(5).uniform(-1, 1, (8, OBS_DIM))
        a = np.random.default_rng(6).uniform(-1, 1, (8, ACT_DIM))
        # make the target critic equal the online critic and use I=1, r=Q(s,a)
        q = mlp_forward(agent.critic, np.concatenate([s, a], axis=1))
        before = agent.critic.flat.copy()
        agent.critic_update(s, a, q.copy(), s, np.ones((8, 1)))
        assert np.max(np.abs(agent.critic.flat - before)) < 1e-12

    def test_actor_climbs_identity_critic(self):
        # a critic hand-built so Q == action exactly
        agent = DdpgAgent(small_cfg(), EnvConfig(), rng=np.random.default_rng(7))
        critic = MLPParams([OBS_DIM + ACT_DIM, 64, 64, 1], "linear")
        critic.weights[0][OBS_DIM, 0] = 1.0   # h1_0 = a + 2 (relu passthrough)
        critic.biases[0][0] = 2.0
        critic.weights[1][0, 0] = 1.0         # h2_0 = a + 2
        critic.weights[2][0, 0] = 1.0
        critic.biases[2][0] = -2.0            # Q = a
        agent.critic = critic
        s = np.random.default_rng(8).uniform(-1, 1, (16, OBS_DIM))
        x = np.concatenate([s, mlp_forward(agent.actor, s)], axis=1)
        assert mlp_forward(critic, x) == pytest.approx(x[:, -1:], abs=1e-12)
        means = []
        for _ in range(300):
            agent.actor_update(s)
            means.append(float(np.mean(mlp_forward(agent.actor, s))))
        assert means[-1] > means[0] + 0.1
        assert all(b >= a - 1e-9 for a, b in zip(means, means[1:]))

    def test_zero_critic_freezes_actor(self):
        agent = DdpgAgent(small_cfg(), EnvConfig(), rng=np.random.default_rng(9))
        agent.critic = MLPParams([OBS_DIM + ACT_DIM, 64, 64, 1], "linear")
        before = agent.actor.flat.copy()
        s = np.random.default_rng(10).uniform(-1, 1, (8, OBS_DIM))
        agent.actor_update(s)
        assert np.max(np.abs(agent.actor.flat - before)) < 1e-12


class TestReplayBuffer:
    def test_eviction_order(self):
        buf = ReplayBuffer(capacity=4, obs_dim=2)
        for i in range(6):
            buf.push(np.array([i, i]), float(i), float(i), np.array([i, i]), 0.0)
        assert len(buf) == 4
        kept = sorted(buf.r[:4, 0].tolist())
        assert kept == [2.0, 3.0, 4.0, 5.0]

    def test_sample_shapes(self):
        buf = ReplayBuffer(capacity=1000, obs_dim=OBS_DIM)
        rng = np.random.default_rng(0)
        for i in range(300):
            buf.push(rng.uniform(size=OBS_DIM), 0.1, 0.2, rng.uniform(size=OBS_DIM), 0.0)
        s, a, r, s2, term = buf.sample(128, rng)
        assert s.shape == (128, OBS_DIM) and a.shape == (128, 1)
        assert r.shape == (128, 1) and s2.shape == (128, OBS_DIM) and term.shape == (128, 1)

    def test_uniform_sampling(self):
        from scipy import stats

        buf = ReplayBuffer(capacity=200, obs_dim=1)
        for i in range(100):
            buf.push(np.array([float(i)]), 0.0, float(i), np.array([0.0]), 0.0)
        rng = np.random.default_rng(42)
        counts = np.zeros(100)
        for _ in range(500):
            _, _, r, _, _ = buf.sample(200, rng)
            for v in r[:, 0]:
                counts[int(v)] += 1
        _, p = stats.chisquare(counts)
        assert p > 0.001

    def test_growth_preserves_contents(self):
        buf = ReplayBuffer(capacity=10_000, obs_dim=1)
        for i in range(5000):
            buf.push(np.array([float(i)]), 0.0, float(i), np.array([0.0]), 0.0)
        assert buf.r[1234, 0] == 1234.0
        assert len(buf) == 5000


class TestActionBound:
    def test_every_emitted_action_in_range(self):
        agent = DdpgAgent(DdpgConfig(), EnvConfig(), rng=np.random.default_rng(0))
        rng = np.random.default_rng(1)
        for _ in range(300):
            obs = rng.uniform(-300, 300, size=OBS_DIM)
            for explore in (False, True):
                a = agent.act(obs, explore=explore)
                assert -4.5 <= a <= 2.6

    def test_eval_mode_is_deterministic(self):
        agent = DdpgAgent(DdpgConfig(), EnvConfig(), rng=np.random.default_rng(0))
        obs = np.random.default_rng(2).uniform(-100, 100, size=OBS_DIM)
        assert agent.act(obs) == agent.act(obs)


class TestTrainLoop:
    def test_one_log_row_per_episode(self, tmp_path):
        env = MergingEnv()
        result = train(env, small_cfg(), seed=5, out_dir=tmp_path)
        lines = (tmp_path / "training_log.csv").read_text().splitlines()
        assert lines[0] == "episode,steps,undiscounted_reward,outcome"
        assert len(lines) - 1 == len(result.episodes)
        assert result.global_steps >= 600

    def test_tiny_budget_runs_zero_updates(self):
        env = MergingEnv()
        result = train(env, small_cfg(total_steps=10), seed=6)
        assert result.agent.critic_adam.t == 0
        assert result.agent.actor_adam.t == 0

    def test_truncated_episodes_bootstrap(self):
        # an artificial cap is not an environment terminal: stored with I = 0
        env = MergingEnv(EnvConfig(max_episode_steps=7))
        result = train(env, small_cfg(total_steps=20), seed=14)
        assert result.episodes[0].outcome == "truncated"
        replay = result.agent.replay
        assert np.all(replay.term[: len(replay), 0] == 0.0)

    def test_real_terminals_cut_bootstrap(self):
        env = MergingEnv()
        result = train(env, small_cfg(total_steps=90), seed=15)
        assert result.episodes[0].outcome in ("success", "collision", "stop")
        replay = result.agent.replay
        terminal_rows = int(np.sum(replay.term[: len(replay), 0]))
        assert terminal_rows == len(result.episodes)

    def test_same_seed_reproduces_training(self, tmp_path):
        log_a = tmp_path / "a"
        log_b = tmp_path / "b"
        train(MergingEnv(), small_cfg(), seed=7, out_dir=log_a)
        train(MergingEnv(), small_cfg(), seed=7, out_dir=log_b)
        assert (log_a / "training_log.csv").read_bytes() == (log_b / "training_log.csv").read_bytes()
        assert (log_a / "checkpoint.ckpt").read_bytes() == (log_b / "checkpoint.ckpt").read_bytes()

    def test_different_seeds_differ(self, tmp_path):
        ra = train(MergingEnv(), small_cfg(), seed=8)
        rb = train(MergingEnv(), small_cfg(), seed=9)
        assert not np.array_equal(ra.agent.actor.flat, rb.agent.actor.flat)


class TestCheckpoints:
    def test_roundtrip_restores_everything(self, tmp_path):
        env = MergingEnv()
        result = train(env, small_cfg(), seed=10, out_dir=tmp_path)
        agent2, step, episodes = load_training_checkpoint(
            tmp_path / "checkpoint.ckpt", small_cfg(), env.cfg
        )
        assert step == result.global_steps
        assert episodes == len(result.episodes)
        assert np.array_equal(agent2.actor.flat, result.agent.actor.flat)
        assert np.array_equal(agent2.target_critic.flat, result.agent.target_critic.flat)
        assert np.array_equal(agent2.critic_adam.m, result.agent.critic_adam.m)
        assert agent2.replay.count == result.agent.replay.count
        assert agent2.rng.bit_generator.state == result.agent.rng.bit_generator.state

    def test_resume_is_bit_exact(self, tmp_path):
        full_dir, p1_dir, p2_dir = tmp_path / "full", tmp_path / "p1", tmp_path / "p2"
        train(MergingEnv(), small_cfg(total_steps=1200), seed=11, out_dir=full_dir)
        train(MergingEnv(), small_cfg(total_steps=600), seed=11, out_dir=p1_dir)
        train(
            MergingEnv(), small_cfg(total_steps=1200), seed=11,
            out_dir=p2_dir, resume=p1_dir / "checkpoint.ckpt",
        )
        assert (full_dir / "checkpoint.ckpt").read_bytes() == (p2_dir / "checkpoint.ckpt").read_bytes()
        joined = (p1_dir / "training_log.csv").read_text() + "".join(
            (p2_dir / "training_log.csv").read_text().splitlines(keepends=True)[1:]
        )
        assert joined == (full_dir / "training_log.csv").read_text()

    def test_corrupt_file_rejected(self, tmp_path):
        env = MergingEnv()
        train(env, small_cfg(total_steps=200), seed=12, out_dir=tmp_path)
        path = tmp_path / "checkpoint.ckpt"
        raw = bytearray(path.read_bytes())
        raw[0] = ord("X")
        bad = tmp_path / "bad.ckpt"
        bad.write_bytes(bytes(raw))
        with pytest.raises(CheckpointError):
            load_training_checkpoint(bad, small_cfg(), env.cfg)
        truncated = tmp_path / "short.ckpt"
        truncated.write_bytes(path.read_bytes()[: len(raw) // 2])
        with pytest.raises(CheckpointError):
            load_training_checkpoint(truncated, small_cfg(), env.cfg)

    def test_architecture_mismatch_rejected(self, tmp_path):
        env = MergingEnv()
        train(env, small_cfg(total_steps=200), seed=13, out_dir=tmp_path)
        meta, arrays = read_container(tmp_path / "checkpoint.ckpt")
        meta["arch"]["hidden"] = [32, 32]
        other = tmp_path / "other.ckpt"
        write_container(other, meta, arrays)
        with pytest.raises(CheckpointError):
            load_training_checkpoint(other, small_cfg(), env.cfg)

    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(CheckpointError):
            load_training_checkpoint(tmp_path / "nope.ckpt", small_cfg(), EnvConfig())
