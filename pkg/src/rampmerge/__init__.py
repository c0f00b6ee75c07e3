"""On-ramp merging: IDM main-road traffic, a DDPG longitudinal controller,
a multi-objective reward engine, and a Pareto sweep harness."""

from .config import (
    ConfigError, DdpgConfig, EnvConfig, RewardWeights, RunConfig,
    TrafficConfig, load_config, save_config, validate_config,
)
from .ddpg import DdpgAgent, ReplayBuffer, train
from .env import EgoState, EpisodeOutcome, MergingEnv, Outcome
from .evaluate import ParetoPoint, TestMetrics, classify_merge, pareto_sweep, run_test
from .reward import RewardBreakdown
from .traffic import IdmParams, TrafficSim, VehicleState

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "DdpgAgent", "DdpgConfig", "EgoState", "EnvConfig",
    "EpisodeOutcome", "IdmParams", "MergingEnv", "Outcome", "ParetoPoint",
    "ReplayBuffer", "RewardBreakdown", "RewardWeights", "RunConfig",
    "TestMetrics", "TrafficConfig", "TrafficSim", "VehicleState",
    "classify_merge", "load_config", "pareto_sweep", "run_test",
    "save_config", "train", "validate_config",
]
