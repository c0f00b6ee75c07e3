"""From-scratch deep deterministic policy gradient learner.

Actor and critic are two-hidden-layer (64, 64) fully connected nets trained
with hand-written backprop and Adam; target copies track the online nets via
soft updates. Exploration adds Gaussian noise in the normalized action space
[-1, 1]. One critic update, one actor update, and one pair of soft updates
run per environment step once the replay buffer covers a batch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .checkpoint import CheckpointError, read_container, write_container
from .config import DdpgConfig, EnvConfig
from .env import OBS_DIM, MergingEnv, Outcome
from .nets import Adam, MLPParams, init_mlp, mlp_backward, mlp_forward, soft_update

HIDDEN_SIZES = (64, 64)
ACT_DIM = 1

_DISTANCE_IDX = np.array([0, 2, 4, 7, 9])
_VELOCITY_IDX = np.array([1, 3, 5, 8, 10])
_ACCEL_IDX = np.array([6])


def observation_scales(
    sensing_radius: float = 200.0, speed_limit: float = 29.06, accel_scale: float = 4.5
) -> np.ndarray:
    scales = np.empty(OBS_DIM, dtype=np.float64)
    scales[_DISTANCE_IDX] = sensing_radius
    scales[_VELOCITY_IDX] = speed_limit
    scales[_ACCEL_IDX] = accel_scale
    return scales


def normalize_observation(obs: np.ndarray, scales: np.ndarray | None = None) -> np.ndarray:
    """Scale distances by the sensing radius, speeds by the speed limit, and
    acceleration by the braking limit; outputs land roughly in [-2, 2]."""
    if scales is None:
        scales = observation_scales()
    return np.asarray(obs, dtype=np.float64) / scales


def denormalize_action(u: float, a_min: float = -4.5, a_max: float = 2.6) -> float:
    """Affine map from [-1, 1] to the physical acceleration range."""
    center = (a_max + a_min) / 2.0
    half = (a_max - a_min) / 2.0
    return center + half * u


def explore_action(
    u: float, rng: np.random.Generator, std: float = 0.02, mean: float = 0.0
) -> float:
    """Training-only Gaussian exploration in normalized action space."""
    noisy = u + rng.normal(mean, std)
    return min(max(noisy, -1.0), 1.0)


def td_target(
    r: np.ndarray,
    term: np.ndarray,
    gamma: float,
    target_actor: MLPParams,
    target_critic: MLPParams,
    s2: np.ndarray,
) -> np.ndarray:
    """Bootstrapped regression target y = r + (1 - I) * gamma * Q'(s', mu'(s'))."""
    a2 = mlp_forward(target_actor, s2)
    q2 = mlp_forward(target_critic, np.concatenate([s2, a2], axis=1))
    return r + (1.0 - term) * gamma * q2


class ReplayBuffer:
    """Uniform-sampling ring buffer; oldest transitions evicted at capacity.

    Storage grows geometrically up to the capacity so a short run does not
    allocate the full ring.
    """

    _INITIAL = 2048

    def __init__(self, capacity: int, obs_dim: int = OBS_DIM):
        self.capacity = capacity
        self.obs_dim = obs_dim
        self.count = 0
        self._alloc = 0
        self.s = self.a = self.r = self.s2 = self.term = None

    def __len__(self) -> int:
        return min(self.count, self.capacity)

    def _grow(self, needed: int) -> None:
        new_alloc = max(self._INITIAL, self._alloc)
        while new_alloc < needed:
            new_alloc *= 2
        new_alloc = min(new_alloc, self.capacity)
        if new_alloc == self._alloc:
            return

        def resize(old, cols):
            fresh = np.zeros((new_alloc, cols), dtype=np.float64)
            if old is not None:
                fresh[: len(old)] = old
            return fresh

        self.s = resize(self.s, self.obs_dim)
        self.a = resize(self.a, 1)
        self.r = resize(self.r, 1)
        self.s2 = resize(self.s2, self.obs_dim)
        self.term = resize(self.term, 1)
        self._alloc = new_alloc

    def push(self, s, a: float, r: float, s2, term: float) -> None:
        pos = self.count % self.capacity
        if pos >= self._alloc:
            self._grow(pos + 1)
        self.s[pos] = s
        self.a[pos, 0] = a
        self.r[pos, 0] = r
        self.s2[pos] = s2
        self.term[pos, 0] = term
        self.count += 1

    def sample(self, batch_size: int, rng: np.random.Generator):
        size = len(self)
        idx = rng.integers(0, size, size=batch_size)
        return self.s[idx], self.a[idx], self.r[idx], self.s2[idx], self.term[idx]

    def state_dict(self) -> dict:
        return {"capacity": self.capacity, "count": self.count, "alloc": self._alloc}

    def arrays(self) -> dict:
        if self._alloc == 0:
            return {}
        return {
            "replay/s": self.s, "replay/a": self.a, "replay/r": self.r,
            "replay/s2": self.s2, "replay/term": self.term,
        }

    def load(self, state: dict, arrays: dict) -> None:
        self.capacity = state["capacity"]
        self.count = state["count"]
        self._alloc = state["alloc"]
        if self._alloc:
            self.s = arrays["replay/s"].copy()
            self.a = arrays["replay/a"].copy()
            self.r = arrays["replay/r"].copy()
            self.s2 = arrays["replay/s2"].copy()
            self.term = arrays["replay/term"].copy()


class DdpgAgent:
    """Actor, critic, their targets, optimizers, replay, and exploration RNG."""

    def __init__(
        self,
        cfg: DdpgConfig,
        env_cfg: EnvConfig | None = None,
        rng: np.random.Generator | None = None,
    ):
        self.cfg = cfg
        env_cfg = env_cfg or EnvConfig()
        self.a_min = env_cfg.a_min
        self.a_max = env_cfg.a_max
        self.scales = observation_scales(
            env_cfg.sensing_radius, env_cfg.speed_limit, max(abs(env_cfg.a_min), env_cfg.a_max)
        )
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.actor = init_mlp([OBS_DIM, *HIDDEN_SIZES, ACT_DIM], "tanh", self.rng)
        self.critic = init_mlp([OBS_DIM + ACT_DIM, *HIDDEN_SIZES, 1], "linear", self.rng)
        self.target_actor = self.actor.copy()
        self.target_critic = self.critic.copy()
        self.actor_adam = Adam(self.actor, cfg.actor_lr)
        self.critic_adam = Adam(self.critic, cfg.critic_lr)
        self.replay = ReplayBuffer(cfg.replay_capacity)
        # throwaway buffer for critic parameter grads during the actor step
        self._critic_grad_scratch = np.empty(self.critic.size, dtype=np.float64)

    # -- acting ---------------------------------------------------------------

    def policy(self, s_norm: np.ndarray) -> float:
        """Deterministic normalized action for one normalized observation."""
        return float(mlp_forward(self.actor, s_norm.reshape(1, -1))[0, 0])

    def act(self, obs: np.ndarray, explore: bool = False) -> float:
        """Physical acceleration for a physical-unit observation."""
        u = self.policy(normalize_observation(obs, self.scales))
        if explore:
            u = explore_action(u, self.rng, self.cfg.noise_std, self.cfg.noise_mean)
        return denormalize_action(u, self.a_min, self.a_max)

    # -- learning -------------------------------------------------------------

    def critic_update(self, s, a, r, s2, term) -> float:
        """One Adam step on the mean squared TD error."""
        y = td_target(r, term, self.cfg.gamma, self.target_actor, self.target_critic, s2)
        q, cache = mlp_forward(self.critic, np.concatenate([s, a], axis=1), cache=True)
        err = q - y
        loss = float(np.mean(err * err))
        if not math.isfinite(loss):
            raise FloatingPointError(
                f"critic loss is not finite ({loss}); q range "
                f"[{np.min(q)}, {np.max(q)}], target range [{np.min(y)}, {np.max(y)}]"
            )
        grad_flat, _ = mlp_backward(self.critic, cache, (2.0 / len(err)) * err)
        self.critic_adam.step(self.critic, grad_flat)
        return loss

    def actor_update(self, s) -> float:
        """One Adam step ascending the batch-mean critic value of the actor's
        actions; the critic stays fixed."""
        u, cache_a = mlp_forward(self.actor, s, cache=True)
        q, cache_c = mlp_forward(self.critic, np.concatenate([s, u], axis=1), cache=True)
        objective = float(np.mean(q))
        grad_out = np.full_like(q, 1.0 / len(q))
        _, grad_in = mlp_backward(self.critic, cache_c, grad_out, out=self._critic_grad_scratch)
        grad_u = grad_in[:, -ACT_DIM:]
        if not np.all(np.isfinite(grad_u)):
            raise FloatingPointError("actor gradient through the critic is not finite")
        grad_flat, _ = mlp_backward(self.actor, cache_a, grad_u)
        np.negative(grad_flat, out=grad_flat)  # ascend
        self.actor_adam.step(self.actor, grad_flat)
        return objective

    def update(self) -> None:
        """One training iteration: critic step, actor step, soft target updates."""
        batch = self.replay.sample(self.cfg.batch_size, self.rng)
        self.critic_update(*batch)
        self.actor_update(batch[0])
        soft_update(self.target_critic, self.critic, self.cfg.tau)
        soft_update(self.target_actor, self.actor, self.cfg.tau)

    def networks(self) -> dict[str, MLPParams]:
        return {
            "actor": self.actor,
            "critic": self.critic,
            "target_actor": self.target_actor,
            "target_critic": self.target_critic,
        }

    def all_finite(self) -> bool:
        return all(net.all_finite() for net in self.networks().values())


@dataclass
class EpisodeRow:
    """One training-log record."""

    episode: int
    steps: int
    undiscounted_reward: float
    outcome: str


@dataclass
class TrainResult:
    agent: DdpgAgent
    episodes: list[EpisodeRow]
    global_steps: int


def agent_rng_seed(seed: int) -> np.random.SeedSequence:
    """Agent stream kept separate from the environment stream."""
    return np.random.SeedSequence(entropy=seed, spawn_key=(1,))


# -- checkpoint wiring --------------------------------------------------------


def save_training_checkpoint(
    path: str | Path, agent: DdpgAgent, env: MergingEnv, global_step: int, episode_count: int
) -> None:
    """Write everything needed to resume bit-exactly at an episode boundary."""
    arrays: dict[str, np.ndarray] = {}
    for net_name, net in agent.networks().items():
        arrays[f"{net_name}/flat"] = net.flat
    for opt_name, opt in (("actor", agent.actor_adam), ("critic", agent.critic_adam)):
        arrays[f"adam_{opt_name}/m"] = opt.m
        arrays[f"adam_{opt_name}/v"] = opt.v
    arrays.update(agent.replay.arrays())
    meta = {
        "arch": {
            "obs_dim": OBS_DIM,
            "act_dim": ACT_DIM,
            "hidden": list(HIDDEN_SIZES),
        },
        "global_step": global_step,
        "episode_count": episode_count,
        "agent_rng": agent.rng.bit_generator.state,
        "adam": {"actor_t": agent.actor_adam.t, "critic_t": agent.critic_adam.t},
        "replay": agent.replay.state_dict(),
        "env": env.state_dict(),
    }
    write_container(path, meta, arrays)


def load_training_checkpoint(
    path: str | Path, cfg: DdpgConfig, env_cfg: EnvConfig, env: MergingEnv | None = None
) -> tuple[DdpgAgent, int, int]:
    """Restore an agent (and optionally the environment world) from a file.

    Returns ``(agent, global_step, episode_count)``. Raises
    :class:`CheckpointError` on corruption or architecture mismatch.
    """
    meta, arrays = read_container(path)
    arch = meta.get("arch", {})
    expected = {"obs_dim": OBS_DIM, "act_dim": ACT_DIM, "hidden": list(HIDDEN_SIZES)}
    if arch != expected:
        raise CheckpointError(
            f"architecture mismatch: checkpoint has {arch}, this build expects {expected}"
        )
    agent = DdpgAgent(cfg, env_cfg, rng=np.random.default_rng(0))
    agent.rng.bit_generator.state = meta["agent_rng"]
    for net_name, net in agent.networks().items():
        key = f"{net_name}/flat"
        if key not in arrays:
            raise CheckpointError(f"checkpoint missing array {key!r}")
        if arrays[key].shape != net.flat.shape:
            raise CheckpointError(
                f"architecture mismatch in {net_name}: "
                f"{arrays[key].shape} vs {net.flat.shape}"
            )
        net.flat[...] = arrays[key]
    for opt_name, opt in (("actor", agent.actor_adam), ("critic", agent.critic_adam)):
        opt.t = meta["adam"][f"{opt_name}_t"]
        opt.m[...] = arrays[f"adam_{opt_name}/m"]
        opt.v[...] = arrays[f"adam_{opt_name}/v"]
    agent.replay.load(meta["replay"], arrays)
    if env is not None:
        env.load_state_dict(meta["env"])
    return agent, meta["global_step"], meta["episode_count"]


# -- training loop --------------------------------------------------------------


def train(
    env: MergingEnv,
    cfg: DdpgConfig,
    seed: int,
    out_dir: str | Path | None = None,
    resume: str | Path | None = None,
    log_hook=None,
) -> TrainResult:
    """Run the training loop for ``cfg.total_steps`` environment steps.

    Episodes always run to termination, so the loop finishes the episode in
    flight when the budget is reached and every checkpoint lands on an
    episode boundary. ``log_hook(episode_row)`` fires after each episode.
    Fully determined by ``seed``.
    """
    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)

    if resume is not None:
        agent, global_step, episode_count = load_training_checkpoint(
            resume, cfg, env.cfg, env
        )
        first_seed = None
    else:
        agent = DdpgAgent(cfg, env.cfg, rng=np.random.default_rng(agent_rng_seed(seed)))
        global_step = 0
        episode_count = 0
        first_seed = seed

    episodes: list[EpisodeRow] = []
    log_file = None
    if out_dir is not None:
        log_path = out_dir / "training_log.csv"
        fresh = resume is None or not log_path.exists()
        log_file = open(log_path, "w" if fresh else "a", encoding="utf-8", newline="")
        if fresh:
            log_file.write("episode,steps,undiscounted_reward,outcome\n")

    ckpt_every = cfg.checkpoint_every
    next_ckpt = (global_step // ckpt_every + 1) * ckpt_every

    def write_checkpoint():
        if out_dir is not None and (global_step > 0 or resume is not None):
            save_training_checkpoint(
                out_dir / "checkpoint.ckpt", agent, env, global_step, episode_count
            )

    try:
        while global_step < cfg.total_steps:
            obs = env.reset(first_seed)
            first_seed = None
            s_norm = normalize_observation(obs, agent.scales)
            ep_reward = 0.0
            ep_steps = 0
            done = False
            outcome = None
            while not done:
                u = agent.policy(s_norm)
                u = explore_action(u, agent.rng, cfg.noise_std, cfg.noise_mean)
                action = denormalize_action(u, agent.a_min, agent.a_max)
                obs, breakdown, done, outcome = env.step(action)
                s2_norm = normalize_observation(obs, agent.scales)
                terminal = float(done and outcome.kind is not Outcome.TRUNCATED)
                reward = breakdown.total
                agent.replay.push(s_norm, u, reward, s2_norm, terminal)
                s_norm = s2_norm
                ep_reward += reward
                ep_steps += 1
                global_step += 1
                # update cadence must not depend on this run's own budget,
                # otherwise a resumed run would diverge from a one-shot run
                if len(agent.replay) >= cfg.batch_size:
                    agent.update()
                if global_step % 1000 == 0 and not agent.all_finite():
                    raise FloatingPointError(
                        f"non-finite network parameters at step {global_step}"
                    )
            episode_count += 1
            row = EpisodeRow(
                episode=episode_count,
                steps=ep_steps,
                undiscounted_reward=ep_reward,
                outcome=outcome.kind.value,
            )
            episodes.append(row)
            if log_file is not None:
                log_file.write(
                    f"{row.episode},{row.steps},{row.undiscounted_reward!r},{row.outcome}\n"
                )
            if log_hook is not None:
                log_hook(row)
            if global_step >= next_ckpt:
                write_checkpoint()
                next_ckpt = (global_step // ckpt_every + 1) * ckpt_every
        write_checkpoint()
    finally:
        if log_file is not None:
            log_file.close()
    return TrainResult(agent=agent, episodes=episodes, global_steps=global_step)
