"""Configuration defaults, YAML loading, and validation messages."""

import pytest
import yaml

from rampmerge.config import (
    ConfigError, RunConfig, config_to_dict, load_config, save_config,
    validate_config,
)


class TestDefaults:
    def test_environment_constants(self):
        cfg = RunConfig()
        assert cfg.env.control_zone_start == 100.0
        assert cfg.env.control_zone_end == -100.0
        assert cfg.env.sensing_radius == 200.0
        assert cfg.env.speed_limit == 29.06
        assert (cfg.env.init_speed_min, cfg.env.init_speed_max) == (22.35, 26.82)
        assert (cfg.env.a_min, cfg.env.a_max) == (-4.5, 2.6)
        assert cfg.env.dt == 0.1
        assert cfg.env.vehicle_length == 5.0
        assert cfg.env.warmup_steps == 100

    def test_traffic_constants(self):
        cfg = RunConfig()
        assert cfg.traffic.spawn_probability == 0.5
        assert cfg.traffic.spawn_period_steps == 10
        assert cfg.traffic.speed_factor_std == 0.1
        assert (cfg.traffic.speed_factor_min, cfg.traffic.speed_factor_max) == (0.8, 1.2)
        assert cfg.traffic.emergency_decel == -9.0

    def test_reward_constants(self):
        cfg = RunConfig()
        assert cfg.reward.w_m == 0.015
        assert cfg.reward.w_b == 0.015
        assert cfg.reward.delta_v_max == 5.0
        assert cfg.reward.j_max == 3.0
        assert cfg.reward.stop_penalty == -0.5
        assert cfg.reward.collision_penalty == -1.0
        assert cfg.reward.success_reward == 1.0

    def test_agent_constants(self):
        cfg = RunConfig()
        assert cfg.agent.tau == 0.001
        assert cfg.agent.gamma == 0.99
        assert cfg.agent.actor_lr == 0.0001
        assert cfg.agent.critic_lr == 0.001
        assert cfg.agent.batch_size == 128
        assert cfg.agent.noise_mean == 0.0
        assert cfg.agent.noise_std == 0.02
        assert cfg.agent.replay_capacity == 1_500_000
        assert cfg.agent.total_steps == 1_500_000

    def test_defaults_validate(self):
        validate_config(RunConfig())


class TestYamlIO:
    def test_roundtrip(self, tmp_path):
        cfg = RunConfig()
        cfg.reward.w_j = 0.00075
        cfg.run.seed = 99
        path = tmp_path / "run.yaml"
        save_config(cfg, path)
        loaded = load_config(path)
        assert config_to_dict(loaded) == config_to_dict(cfg)

    def test_partial_override(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text("env:\n  sensing_radius: 150.0\nagent:\n  batch_size: 64\n")
        cfg = load_config(path)
        assert cfg.env.sensing_radius == 150.0
        assert cfg.agent.batch_size == 64
        assert cfg.env.speed_limit == 29.06  # untouched default

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "absent.yaml")

    def test_unknown_block(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text("simulator:\n  x: 1\n")
        with pytest.raises(ConfigError, match="simulator"):
            load_config(path)

    def test_unknown_field_named(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text("env:\n  lane_count: 2\n")
        with pytest.raises(ConfigError, match="env.lane_count"):
            load_config(path)

    def test_type_error_named(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text("agent:\n  batch_size: many\n")
        with pytest.raises(ConfigError, match="agent.batch_size"):
            load_config(path)

    def test_invalid_yaml(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text("env: [unclosed\n")
        with pytest.raises(ConfigError):
            load_config(path)


class TestValidation:
    def check(self, mutate, match):
        cfg = RunConfig()
        mutate(cfg)
        with pytest.raises(ConfigError, match=match):
            validate_config(cfg)

    def test_a_max_bound_named(self):
        self.check(lambda c: setattr(c.env, "a_max", 5.0), r"env\.a_max.*\(0, 2\.6\]")

    def test_a_min_bound(self):
        self.check(lambda c: setattr(c.env, "a_min", -12.0), r"env\.a_min")

    def test_control_zone_must_straddle(self):
        self.check(lambda c: setattr(c.env, "control_zone_end", 5.0), "control_zone")

    def test_spawn_probability_range(self):
        self.check(lambda c: setattr(c.traffic, "spawn_probability", 1.5), "spawn_probability")

    def test_collision_penalty_dominates_stop(self):
        self.check(lambda c: setattr(c.reward, "collision_penalty", -0.4), "collision_penalty")

    def test_negative_weight_rejected(self):
        self.check(lambda c: setattr(c.reward, "w_j", -0.1), r"reward\.w_j")

    def test_replay_capacity_covers_batch(self):
        self.check(lambda c: setattr(c.agent, "replay_capacity", 10), "replay_capacity")

    def test_emergency_decel_below_normal(self):
        self.check(lambda c: setattr(c.traffic, "emergency_decel", -2.0), "emergency_decel")

    def test_test_seed_resolution(self):
        cfg = RunConfig()
        cfg.run.seed = 5
        derived = cfg.resolved_test_seed()
        assert derived != 5
        cfg.run.test_seed = 1234
        assert cfg.resolved_test_seed() == 1234
