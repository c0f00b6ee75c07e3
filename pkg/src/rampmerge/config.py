"""Run configuration: dataclass blocks, YAML loading, and validation.

Defaults reproduce the reference merging setup; every numeric constant can be
overridden from a config file, subject to the validation bounds below.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import yaml


class ConfigError(ValueError):
    """Invalid configuration value; message names the offending field."""


@dataclass
class EnvConfig:
    """Road geometry, ego kinematics, and episode lifecycle constants."""

    control_zone_start: float = 100.0   # m before the merge point, on ramp
    control_zone_end: float = -100.0    # m past the merge point, on main road
    sensing_radius: float = 200.0
    junction_length: float = 10.0       # ramp stretch where lateral conflict exists
    spawn_distance: float = 400.0       # main-road entry point, outside sensing
    removal_distance: float = -400.0    # main-road exit point
    vehicle_length: float = 5.0
    speed_limit: float = 29.06
    init_speed_min: float = 22.35
    init_speed_max: float = 26.82
    a_min: float = -4.5
    a_max: float = 2.6
    dt: float = 0.1
    warmup_steps: int = 100             # traffic-only steps before each episode
    max_episode_steps: int = 1200       # cap -> Truncated outcome


@dataclass
class TrafficConfig:
    """Main-road spawning and IDM car-following parameters."""

    spawn_probability: float = 0.5
    spawn_period_steps: int = 10        # one attempt per simulated second
    speed_factor_mean: float = 1.0
    speed_factor_std: float = 0.1
    speed_factor_min: float = 0.8
    speed_factor_max: float = 1.2
    headway_min: float = 1.0            # per-vehicle T ~ Uniform[min, max]
    headway_max: float = 1.6
    min_gap: float = 2.0                # IDM s0
    max_accel: float = 1.5              # IDM a
    comfort_decel: float = 2.0          # IDM b
    delta: float = 4.0
    emergency_decel: float = -9.0


@dataclass
class RewardWeights:
    """Weights and scales of the multi-objective step reward."""

    w_m: float = 0.015
    w_b: float = 0.015
    w_j: float = 0.0                    # swept over [0, 0.015]
    delta_v_max: float = 5.0
    j_max: float = 3.0
    stop_penalty: float = -0.5
    collision_penalty: float = -1.0
    success_reward: float = 1.0


@dataclass
class DdpgConfig:
    """Learner hyperparameters (defaults match the tuned reference values)."""

    tau: float = 0.001
    gamma: float = 0.99
    actor_lr: float = 0.0001
    critic_lr: float = 0.001
    batch_size: int = 128
    noise_mean: float = 0.0
    noise_std: float = 0.02             # in normalized action units
    replay_capacity: int = 1_500_000
    total_steps: int = 1_500_000
    checkpoint_every: int = 50_000      # steps between periodic checkpoints


@dataclass
class RunSettings:
    """Orchestration: seeds, budgets, output paths, sweep grid."""

    seed: int = 0
    test_seed: int | None = None        # None -> seed + TEST_SEED_OFFSET
    test_steps: int = 50_000
    out_dir: str | None = None
    checkpoint: str | None = None
    episodes_log: int = 0               # trajectory CSVs to write during eval
    parallel: int = 1
    sweep_weights: list[float] = field(
        default_factory=lambda: [0.0, 0.00075, 0.0015, 0.003, 0.0075, 0.015]
    )
    sweep_seeds: list[int] = field(default_factory=list)  # empty -> [seed]


TEST_SEED_OFFSET = 100_003


@dataclass
class RunConfig:
    env: EnvConfig = field(default_factory=EnvConfig)
    traffic: TrafficConfig = field(default_factory=TrafficConfig)
    reward: RewardWeights = field(default_factory=RewardWeights)
    agent: DdpgConfig = field(default_factory=DdpgConfig)
    run: RunSettings = field(default_factory=RunSettings)

    def resolved_test_seed(self) -> int:
        if self.run.test_seed is not None:
            return self.run.test_seed
        return self.run.seed + TEST_SEED_OFFSET


_BLOCKS = {
    "env": EnvConfig,
    "traffic": TrafficConfig,
    "reward": RewardWeights,
    "agent": DdpgConfig,
    "run": RunSettings,
}


def _coerce(block: str, f: dataclasses.Field, value):
    name = f"{block}.{f.name}"
    if value is None:
        if f.name in ("test_seed", "out_dir", "checkpoint"):
            return None
        raise ConfigError(f"{name}: may not be null")
    if f.type in ("float", float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{name}: expected a number, got {value!r}")
        return float(value)
    if f.type in ("int", int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{name}: expected an integer, got {value!r}")
        return int(value)
    if f.name in ("sweep_weights", "sweep_seeds"):
        if not isinstance(value, list):
            raise ConfigError(f"{name}: expected a list, got {value!r}")
        kind = float if f.name == "sweep_weights" else int
        out = []
        for v in value:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(f"{name}: expected numbers, got {v!r}")
            out.append(kind(v))
        return out
    return value


def _build_block(block_name: str, cls, data: dict):
    known = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in known:
            raise ConfigError(f"{block_name}.{key}: unknown field")
        kwargs[key] = _coerce(block_name, known[key], value)
    return cls(**kwargs)


def config_from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root: expected a mapping of blocks")
    cfg = RunConfig()
    for block_name, block_data in data.items():
        if block_name not in _BLOCKS:
            raise ConfigError(f"{block_name}: unknown config block")
        if block_data is None:
            continue
        if not isinstance(block_data, dict):
            raise ConfigError(f"{block_name}: expected a mapping")
        setattr(cfg, block_name, _build_block(block_name, _BLOCKS[block_name], block_data))
    return cfg


def load_config(path: str | Path) -> RunConfig:
    """Parse and validate a YAML config file."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"config file is not valid YAML: {exc}") from exc
    cfg = config_from_dict(data or {})
    validate_config(cfg)
    return cfg


def config_to_dict(cfg: RunConfig) -> dict:
    return {name: dataclasses.asdict(getattr(cfg, name)) for name in _BLOCKS}


def save_config(cfg: RunConfig, path: str | Path) -> None:
    """Write the fully resolved config echo (provenance for a run directory)."""
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(config_to_dict(cfg), fh, sort_keys=True)


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigError(message)


def validate_config(cfg: RunConfig) -> None:
    """Reject invalid values with field-level messages, before any simulation."""
    e, t, r, a, run = cfg.env, cfg.traffic, cfg.reward, cfg.agent, cfg.run

    _require(e.dt > 0, f"env.dt: must be > 0 (got {e.dt})")
    _require(
        e.control_zone_start > 0 > e.control_zone_end,
        "env.control_zone_start/control_zone_end: control zone must straddle "
        f"the merge point (got {e.control_zone_start}, {e.control_zone_end})",
    )
    _require(e.sensing_radius > 0, f"env.sensing_radius: must be > 0 (got {e.sensing_radius})")
    _require(
        0 <= e.junction_length <= e.control_zone_start,
        f"env.junction_length: must be in [0, {e.control_zone_start}] (got {e.junction_length})",
    )
    _require(
        e.spawn_distance > e.control_zone_start,
        f"env.spawn_distance: must be > control_zone_start (got {e.spawn_distance})",
    )
    _require(
        e.removal_distance < e.control_zone_end,
        f"env.removal_distance: must be < control_zone_end (got {e.removal_distance})",
    )
    _require(e.vehicle_length > 0, f"env.vehicle_length: must be > 0 (got {e.vehicle_length})")
    _require(e.speed_limit > 0, f"env.speed_limit: must be > 0 (got {e.speed_limit})")
    _require(
        0 < e.init_speed_min <= e.init_speed_max,
        f"env.init_speed_min/init_speed_max: need 0 < min <= max "
        f"(got {e.init_speed_min}, {e.init_speed_max})",
    )
    _require(
        -4.5 <= e.a_min < 0,
        f"env.a_min: must be in [-4.5, 0) (got {e.a_min})",
    )
    _require(
        0 < e.a_max <= 2.6,
        f"env.a_max: must be in (0, 2.6] (got {e.a_max})",
    )
    _require(e.warmup_steps >= 0, f"env.warmup_steps: must be >= 0 (got {e.warmup_steps})")
    _require(
        e.max_episode_steps > 0,
        f"env.max_episode_steps: must be > 0 (got {e.max_episode_steps})",
    )

    _require(
        0 <= t.spawn_probability <= 1,
        f"traffic.spawn_probability: must be in [0, 1] (got {t.spawn_probability})",
    )
    _require(
        t.spawn_period_steps >= 1,
        f"traffic.spawn_period_steps: must be >= 1 (got {t.spawn_period_steps})",
    )
    _require(
        0 < t.speed_factor_min <= t.speed_factor_max,
        f"traffic.speed_factor_min/speed_factor_max: need 0 < min <= max "
        f"(got {t.speed_factor_min}, {t.speed_factor_max})",
    )
    _require(
        t.speed_factor_std >= 0,
        f"traffic.speed_factor_std: must be >= 0 (got {t.speed_factor_std})",
    )
    _require(
        0 < t.headway_min <= t.headway_max,
        f"traffic.headway_min/headway_max: need 0 < min <= max "
        f"(got {t.headway_min}, {t.headway_max})",
    )
    _require(t.min_gap > 0, f"traffic.min_gap: must be > 0 (got {t.min_gap})")
    _require(
        0 < t.max_accel <= e.a_max,
        f"traffic.max_accel: must be in (0, env.a_max={e.a_max}] (got {t.max_accel})",
    )
    _require(t.comfort_decel > 0, f"traffic.comfort_decel: must be > 0 (got {t.comfort_decel})")
    _require(t.delta > 0, f"traffic.delta: must be > 0 (got {t.delta})")
    _require(
        t.emergency_decel <= e.a_min,
        f"traffic.emergency_decel: must be <= env.a_min={e.a_min} (got {t.emergency_decel})",
    )

    for name in ("w_m", "w_b", "w_j"):
        value = getattr(r, name)
        _require(value >= 0, f"reward.{name}: must be >= 0 (got {value})")
    _require(r.delta_v_max > 0, f"reward.delta_v_max: must be > 0 (got {r.delta_v_max})")
    _require(r.j_max > 0, f"reward.j_max: must be > 0 (got {r.j_max})")
    _require(r.stop_penalty <= 0, f"reward.stop_penalty: must be <= 0 (got {r.stop_penalty})")
    _require(
        r.collision_penalty <= 0,
        f"reward.collision_penalty: must be <= 0 (got {r.collision_penalty})",
    )
    _require(
        abs(r.collision_penalty) > abs(r.stop_penalty),
        "reward.collision_penalty: magnitude must exceed reward.stop_penalty "
        f"(got {r.collision_penalty} vs {r.stop_penalty})",
    )
    _require(r.success_reward >= 0, f"reward.success_reward: must be >= 0 (got {r.success_reward})")

    _require(0 < a.tau <= 1, f"agent.tau: must be in (0, 1] (got {a.tau})")
    _require(0 <= a.gamma <= 1, f"agent.gamma: must be in [0, 1] (got {a.gamma})")
    _require(a.actor_lr > 0, f"agent.actor_lr: must be > 0 (got {a.actor_lr})")
    _require(a.critic_lr > 0, f"agent.critic_lr: must be > 0 (got {a.critic_lr})")
    _require(a.batch_size >= 1, f"agent.batch_size: must be >= 1 (got {a.batch_size})")
    _require(a.noise_std >= 0, f"agent.noise_std: must be >= 0 (got {a.noise_std})")
    _require(
        a.replay_capacity >= a.batch_size,
        f"agent.replay_capacity: must be >= batch_size={a.batch_size} (got {a.replay_capacity})",
    )
    _require(a.total_steps >= 0, f"agent.total_steps: must be >= 0 (got {a.total_steps})")
    _require(
        a.checkpoint_every > 0,
        f"agent.checkpoint_every: must be > 0 (got {a.checkpoint_every})",
    )

    _require(run.test_steps >= 0, f"run.test_steps: must be >= 0 (got {run.test_steps})")
    _require(run.episodes_log >= 0, f"run.episodes_log: must be >= 0 (got {run.episodes_log})")
    _require(run.parallel >= 1, f"run.parallel: must be >= 1 (got {run.parallel})")
    for w in run.sweep_weights:
        _require(w >= 0, f"run.sweep_weights: entries must be >= 0 (got {w})")
