"""Policy testing without exploration noise: per-episode metrics,
merge-ahead/behind classification, and the jerk-weight Pareto sweep."""

from __future__ import annotations

import dataclasses
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .config import TEST_SEED_OFFSET, RunConfig, save_config
from .ddpg import DdpgAgent, train
from .env import EpisodeOutcome, MergingEnv, Outcome

MERGE_AHEAD = "ahead"
MERGE_BEHIND = "behind"


@dataclass
class TestMetrics:
    """Aggregate testing metrics; rates are per-episode, averages are means
    of per-episode means."""

    __test__ = False  # keep pytest from collecting this as a test class

    episode_count: int = 0
    collision_count: int = 0
    stop_count: int = 0
    avg_collision_rate: float = 0.0
    avg_jerk: float = 0.0
    avg_accel: float = 0.0
    avg_velocity: float = 0.0
    merge_ahead_rate: float = 0.0
    merge_behind_rate: float = 0.0

    @property
    def valid(self) -> bool:
        return self.episode_count > 0


@dataclass
class ParetoPoint:
    w_j: float
    metrics: TestMetrics
    status: str = "ok"
    seeds: list[int] = field(default_factory=list)       # aligned with per_seed
    per_seed: list[TestMetrics] = field(default_factory=list)


class MergeTracker:
    """Online merge decision classification for one episode.

    Feeds on (ego distance-to-merge, real main-road (id, d) pairs) once per
    step, starting with the reset state. While the ego is on the ramp, every
    projection crossing flips a vehicle's role and records an event: a
    follower overtaking the ego commits the ego to merging behind it, the ego
    overtaking a preceding vehicle commits it to merging ahead. At the moment
    the ego crosses the merge point, the relation to the entry-time first
    follower is emitted unless the last crossing already recorded it.
    Episodes that never reach the merge point yield no events.
    """

    def __init__(self):
        self._prev_roles: dict[int, bool] | None = None  # id -> is_preceding
        self._prev_d_m = 0.0
        self._anchor: int | None = None
        self._merged = False
        self._events: list[str] = []

    def update(self, d_m: float, vehicles) -> None:
        if self._merged:
            return
        roles = {vid: d <= d_m for vid, d in vehicles}
        if self._prev_roles is None:
            followers = [(d, vid) for vid, d in vehicles if d > d_m]
            self._anchor = min(followers)[1] if followers else None
        elif self._prev_d_m > 0.0:
            for vid, now_preceding in roles.items():
                was_preceding = self._prev_roles.get(vid)
                if was_preceding is not None and was_preceding != now_preceding:
                    self._events.append(MERGE_BEHIND if now_preceding else MERGE_AHEAD)
            if d_m <= 0.0:
                final = MERGE_AHEAD
                if self._anchor is not None and roles.get(self._anchor, False):
                    final = MERGE_BEHIND
                if not self._events or self._events[-1] != final:
                    self._events.append(final)
                self._merged = True
        self._prev_roles = roles
        self._prev_d_m = d_m

    def finish(self) -> list[str]:
        return list(self._events) if self._merged else []


def classify_merge(trajectory) -> list[str]:
    """Classify the merge decisions of one episode trajectory.

    ``trajectory`` is an iterable of ``(d_m, [(vehicle_id, d), ...])`` step
    records including the reset state. Returns the ordered merge events, or
    an empty list if the episode never reached the merge point.
    """
    tracker = MergeTracker()
    for d_m, vehicles in trajectory:
        tracker.update(d_m, vehicles)
    return tracker.finish()


def run_test(
    agent: DdpgAgent,
    env: MergingEnv,
    steps: int,
    seed: int,
    step_hook=None,
    episode_hook=None,
) -> tuple[TestMetrics, list[EpisodeOutcome]]:
    """Run deterministic-policy episodes until the step budget is exhausted.

    The episode in flight when the budget runs out is completed so every
    metric is a whole-episode statistic. A non-positive budget returns
    invalid (zero-episode) metrics. ``step_hook(env, obs, breakdown, done,
    outcome)`` fires after every step, ``episode_hook(outcome)`` after every
    episode.
    """
    metrics = TestMetrics()
    if steps <= 0:
        return metrics, []

    outcomes: list[EpisodeOutcome] = []
    sum_jerk = sum_accel = sum_vel = 0.0
    ahead_events = behind_events = 0
    steps_used = 0
    next_seed = seed

    while steps_used < steps:
        obs = env.reset(next_seed)
        next_seed = None
        tracker = MergeTracker()
        tracker.update(env.ego.d_m, env.real_vehicle_positions())
        done = False
        outcome = None
        while not done:
            action = agent.act(obs, explore=False)
            obs, breakdown, done, outcome = env.step(action)
            steps_used += 1
            tracker.update(env.ego.d_m, env.real_vehicle_positions())
            if step_hook is not None:
                step_hook(env, obs, breakdown, done, outcome)
        outcome.merge_events = tracker.finish()
        outcomes.append(outcome)
        metrics.episode_count += 1
        if outcome.kind is Outcome.COLLISION:
            metrics.collision_count += 1
        elif outcome.kind is Outcome.STOP:
            metrics.stop_count += 1
        sum_jerk += outcome.mean_abs_jerk
        sum_accel += outcome.mean_abs_accel
        sum_vel += outcome.mean_velocity
        ahead_events += outcome.merge_events.count(MERGE_AHEAD)
        behind_events += outcome.merge_events.count(MERGE_BEHIND)
        if episode_hook is not None:
            episode_hook(outcome)

    n = metrics.episode_count
    metrics.avg_collision_rate = metrics.collision_count / n
    metrics.avg_jerk = sum_jerk / n
    metrics.avg_accel = sum_accel / n
    metrics.avg_velocity = sum_vel / n
    metrics.merge_ahead_rate = ahead_events / n
    metrics.merge_behind_rate = behind_events / n
    return metrics, outcomes


def _mean(values) -> float:
    values = list(values)
    return sum(values) / len(values) if values else 0.0


def aggregate_metrics(per_seed: list[TestMetrics]) -> TestMetrics:
    """Across seed replicates: rates and averages are averaged, counts summed."""
    return TestMetrics(
        episode_count=sum(m.episode_count for m in per_seed),
        collision_count=sum(m.collision_count for m in per_seed),
        stop_count=sum(m.stop_count for m in per_seed),
        avg_collision_rate=_mean(m.avg_collision_rate for m in per_seed),
        avg_jerk=_mean(m.avg_jerk for m in per_seed),
        avg_accel=_mean(m.avg_accel for m in per_seed),
        avg_velocity=_mean(m.avg_velocity for m in per_seed),
        merge_ahead_rate=_mean(m.merge_ahead_rate for m in per_seed),
        merge_behind_rate=_mean(m.merge_behind_rate for m in per_seed),
    )


def train_and_test(
    cfg: RunConfig,
    w_j: float,
    seed: int,
    train_steps: int | None = None,
    test_steps: int | None = None,
    out_dir: str | Path | None = None,
) -> TestMetrics:
    """Train a fresh policy with the given jerk weight and seed, then test it
    on held-out traffic."""
    cfg = dataclasses.replace(cfg)
    cfg.reward = dataclasses.replace(cfg.reward, w_j=w_j)
    agent_cfg = dataclasses.replace(cfg.agent)
    if train_steps is not None:
        agent_cfg.total_steps = train_steps
    cfg.agent = agent_cfg
    cfg.run = dataclasses.replace(cfg.run, seed=seed)
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        save_config(cfg, Path(out_dir) / "config.yaml")
    env = MergingEnv(cfg.env, cfg.traffic, cfg.reward)
    result = train(env, agent_cfg, seed=seed, out_dir=out_dir)
    test_env = MergingEnv(cfg.env, cfg.traffic, cfg.reward)
    budget = test_steps if test_steps is not None else cfg.run.test_steps
    metrics, _ = run_test(result.agent, test_env, budget, seed + TEST_SEED_OFFSET)
    return metrics


def _sweep_worker(args):
    cfg, w_j, seed, out_dir = args
    try:
        metrics = train_and_test(cfg, w_j, seed, out_dir=out_dir)
        return w_j, seed, metrics, None
    except Exception as exc:  # noqa: BLE001 - failures are recorded, sweep continues
        return w_j, seed, None, f"{type(exc).__name__}: {exc}"


def weight_dirname(w_j: float) -> str:
    return f"wj_{w_j:g}"


def pareto_sweep(
    weights: list[float],
    train_steps: int,
    test_steps: int,
    seeds: list[int],
    cfg: RunConfig | None = None,
    out_dir: str | Path | None = None,
    parallel: int = 1,
) -> list[ParetoPoint]:
    """Trace the collision/jerk trade-off over jerk-penalty weights.

    Every (weight, seed) pair is an independent, fully seeded run; results
    come back ordered by weight with per-seed metrics attached. Individual
    run failures are recorded in the point's status and the sweep continues.
    """
    if not weights:
        raise ValueError("sweep weight list may not be empty")
    cfg = cfg or RunConfig()
    cfg = dataclasses.replace(cfg)
    cfg.agent = dataclasses.replace(cfg.agent, total_steps=train_steps)
    cfg.run = dataclasses.replace(cfg.run, test_steps=test_steps)

    jobs = []
    for w_j in weights:
        for seed in seeds:
            job_dir = None
            if out_dir is not None:
                job_dir = Path(out_dir) / weight_dirname(w_j) / f"seed_{seed}"
            jobs.append((cfg, w_j, seed, job_dir))

    if parallel > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            results = list(pool.map(_sweep_worker, jobs))
    else:
        results = [_sweep_worker(job) for job in jobs]

    points = []
    for w_j in sorted(set(weights)):
        ok_seeds = []
        per_seed = []
        errors = []
        for rw, seed, metrics, error in results:
            if rw != w_j:
                continue
            if error is not None:
                errors.append(f"seed {seed}: {error}")
            else:
                ok_seeds.append(seed)
                per_seed.append(metrics)
        status = "ok" if not errors else "; ".join(errors)
        points.append(
            ParetoPoint(
                w_j=w_j,
                metrics=aggregate_metrics(per_seed),
                status=status,
                seeds=ok_seeds,
                per_seed=per_seed,
            )
        )
    return points
