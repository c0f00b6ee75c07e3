"""Single-lane on-ramp merging environment.

The ego vehicle approaches a taper ramp's merge point under longitudinal
acceleration control; main-road traffic follows the IDM. Distances use the
distance-to-merge-point coordinate (positive before, negative after), so the
ego starts at +control_zone_start and succeeds at -|control_zone_end|.

One environment instance is strictly sequential; independent instances with
independent seeds may run in parallel.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .config import EnvConfig, RewardWeights, TrafficConfig
from .reward import RewardBreakdown, step_breakdown
from .traffic import TrafficSim, VehicleState

OBS_DIM = 11
# Observation slot order: [d_p2, v_p2, d_p1, v_p1, d_m, v_m, a_m, d_f1, v_f1, d_f2, v_f2]
(
    OBS_D_P2, OBS_V_P2, OBS_D_P1, OBS_V_P1,
    OBS_D_M, OBS_V_M, OBS_A_M,
    OBS_D_F1, OBS_V_F1, OBS_D_F2, OBS_V_F2,
) = range(OBS_DIM)

VIRTUAL_P2, VIRTUAL_P1, VIRTUAL_F1, VIRTUAL_F2 = 1, 2, 4, 8  # is_virtual bitmask

_PRECEDING_SLOTS = ("p1", "p2")
_FOLLOWING_SLOTS = ("f1", "f2")


class Outcome(str, enum.Enum):
    SUCCESS = "success"
    COLLISION = "collision"
    STOP = "stop"
    TRUNCATED = "truncated"


@dataclass
class EpisodeOutcome:
    """Terminal record of one episode with per-episode aggregates."""

    kind: Outcome
    steps: int
    mean_abs_jerk: float
    mean_abs_accel: float
    mean_velocity: float
    merge_events: list[str] = field(default_factory=list)


@dataclass(slots=True)
class EgoState:
    """Merging vehicle's longitudinal state; ``prev_a_m`` backs the jerk term."""

    d_m: float
    v_m: float
    a_m: float = 0.0
    prev_a_m: float = 0.0

    @property
    def on_main_road(self) -> bool:
        return self.d_m <= 0.0


class EpisodeTerminatedError(RuntimeError):
    """Raised when ``step`` is called on a finished episode."""


def integrate_ego(ego: EgoState, a: float, dt: float = 0.1) -> EgoState:
    """One explicit Euler step: position advances with the pre-update speed,
    speed is floored at zero. ``a`` must already be clamped."""
    new_v = ego.v_m + a * dt
    return EgoState(
        d_m=ego.d_m - ego.v_m * dt,
        v_m=new_v if new_v > 0.0 else 0.0,
        a_m=a,
        prev_a_m=ego.a_m,
    )


def make_virtual(
    slot: str,
    ego_projection_d: float,
    sensing_radius: float = 200.0,
    speed_limit: float = 29.06,
    length: float = 5.0,
) -> VehicleState:
    """Placeholder neighbor at the sensing boundary, driving at the speed
    limit. Observation-only: it never moves, brakes, or collides."""
    if slot in _PRECEDING_SLOTS:
        d = ego_projection_d - sensing_radius
    elif slot in _FOLLOWING_SLOTS:
        d = ego_projection_d + sensing_radius
    else:
        raise ValueError(f"unknown neighbor slot: {slot!r}")
    return VehicleState(id=-1, d=d, v=speed_limit, a=0.0, length=length, is_virtual=True)


def neighbors(
    ego_projection_d: float,
    vehicles,
    sensing_radius: float = 200.0,
    speed_limit: float = 29.06,
    length: float = 5.0,
) -> tuple[VehicleState, VehicleState, VehicleState, VehicleState]:
    """Resolve (p2, p1, f1, f2) around the ego projection.

    Roles are recomputed from current positions every step, so a vehicle may
    flip between following and preceding as the ego speeds up or slows down.
    A vehicle exactly at the projection counts as preceding. Missing slots
    are filled with virtual vehicles at the sensing boundary.
    """
    preceding = []  # d <= ego projection, ascending
    following = []  # d > ego projection, ascending
    for veh in vehicles:
        if veh.d <= ego_projection_d:
            preceding.append(veh)
        else:
            following.append(veh)
    preceding.sort(key=lambda veh: veh.d)
    following.sort(key=lambda veh: veh.d)

    def virt(slot):
        return make_virtual(slot, ego_projection_d, sensing_radius, speed_limit, length)

    p1 = preceding[-1] if len(preceding) >= 1 else virt("p1")
    p2 = preceding[-2] if len(preceding) >= 2 else virt("p2")
    f1 = following[0] if len(following) >= 1 else virt("f1")
    f2 = following[1] if len(following) >= 2 else virt("f2")
    return p2, p1, f1, f2


def build_observation(
    ego: EgoState,
    p2: VehicleState,
    p1: VehicleState,
    f1: VehicleState,
    f2: VehicleState,
) -> np.ndarray:
    """11-vector in physical units; neighbor accelerations are deliberately
    excluded."""
    return np.array(
        [p2.d, p2.v, p1.d, p1.v, ego.d_m, ego.v_m, ego.a_m, f1.d, f1.v, f2.d, f2.v],
        dtype=np.float64,
    )


def detect_collision(
    ego: EgoState,
    vehicles,
    junction_length: float = 10.0,
    gap_threshold: float = 2.5,
    ego_length: float = 5.0,
) -> bool:
    """True iff the ego is in the junction area or on the main road and the
    bumper-to-bumper gap to its immediate real neighbor is below threshold."""
    if ego.d_m > junction_length:
        return False
    nearest_prec = None
    nearest_foll = None
    for veh in vehicles:
        if veh.is_virtual:
            continue
        if veh.d <= ego.d_m:
            if nearest_prec is None or veh.d > nearest_prec.d:
                nearest_prec = veh
        elif nearest_foll is None or veh.d < nearest_foll.d:
            nearest_foll = veh
    if nearest_prec is not None:
        if (ego.d_m - nearest_prec.d) - nearest_prec.length < gap_threshold:
            return True
    if nearest_foll is not None:
        if (nearest_foll.d - ego.d_m) - ego_length < gap_threshold:
            return True
    return False


def check_termination(
    ego: EgoState,
    vehicles,
    junction_length: float = 10.0,
    zone_end: float = -100.0,
    gap_threshold: float = 2.5,
    ego_length: float = 5.0,
) -> Outcome | None:
    """Collision takes precedence over stop, stop over success."""
    if detect_collision(ego, vehicles, junction_length, gap_threshold, ego_length):
        return Outcome.COLLISION
    if ego.v_m == 0.0:
        return Outcome.STOP
    if ego.d_m <= zone_end:
        return Outcome.SUCCESS
    return None


class MergingEnv:
    """Episode lifecycle around the merge: reset, step, terminate.

    The main-road world persists across unseeded resets (traffic keeps
    flowing between episodes, separated by a warm-up buffer with no ego);
    ``reset(seed=...)`` rebuilds the world from scratch so a seeded run is
    fully reproducible.
    """

    def __init__(
        self,
        env_cfg: EnvConfig | None = None,
        traffic_cfg: TrafficConfig | None = None,
        weights: RewardWeights | None = None,
    ):
        self.cfg = env_cfg or EnvConfig()
        self.traffic_cfg = traffic_cfg or TrafficConfig()
        self.weights = weights or RewardWeights()
        self._rng: np.random.Generator | None = None
        self.traffic: TrafficSim | None = None
        self.ego: EgoState | None = None
        self._done = True
        self._steps = 0
        self.episode_index = -1
        self._sum_abs_jerk = 0.0
        self._sum_abs_accel = 0.0
        self._sum_velocity = 0.0
        self.last_step_info: dict = {}
        self.spawn_hook = None  # callable(vehicle, t_steps), survives resets
        self._a_norm = max(abs(self.cfg.a_min), self.cfg.a_max)

    # -- lifecycle -----------------------------------------------------------

    def reset(self, seed: int | None = None) -> np.ndarray:
        """Start a new episode after a traffic-only warm-up buffer.

        With a seed, the world is cleared and the RNG reseeded, so the run is
        fully determined by the seed; without one, traffic and RNG state
        carry over from the previous episode.
        """
        if seed is not None:
            self._rng = np.random.default_rng(seed)
            self.traffic = TrafficSim(self.traffic_cfg, self.cfg, self._rng)
        elif self._rng is None:
            raise ValueError("first reset() needs an explicit seed")
        self.traffic.spawn_hook = self.spawn_hook

        self.episode_index += 1
        for _ in range(self.cfg.warmup_steps):
            self.traffic.step()

        self.ego = EgoState(
            d_m=self.cfg.control_zone_start,
            v_m=float(self._rng.uniform(self.cfg.init_speed_min, self.cfg.init_speed_max)),
            a_m=0.0,
            prev_a_m=0.0,
        )
        self._done = False
        self._steps = 0
        self._sum_abs_jerk = 0.0
        self._sum_abs_accel = 0.0
        self._sum_velocity = 0.0
        self.last_step_info = {}
        return self._observe()[0]

    def step(self, action: float) -> tuple[np.ndarray, RewardBreakdown, bool, EpisodeOutcome | None]:
        """Apply one clamped acceleration command and advance the world."""
        if self._done:
            raise EpisodeTerminatedError("episode is terminated; call reset() first")
        action = float(action)
        if not math.isfinite(action):
            raise ValueError(f"action must be finite, got {action}")
        a = min(max(action, self.cfg.a_min), self.cfg.a_max)

        prev_d, prev_v = self.ego.d_m, self.ego.v_m
        self.ego = integrate_ego(self.ego, a, self.cfg.dt)
        self.traffic.step(prev_d, prev_v)
        self._steps += 1

        kind = check_termination(
            self.ego,
            self.traffic.vehicles,
            junction_length=self.cfg.junction_length,
            zone_end=self.cfg.control_zone_end,
            ego_length=self.cfg.vehicle_length,
        )
        if kind is None and self._steps >= self.cfg.max_episode_steps:
            kind = Outcome.TRUNCATED

        jerk = (self.ego.a_m - self.ego.prev_a_m) / self.cfg.dt
        self._sum_abs_jerk += abs(jerk)
        self._sum_abs_accel += abs(self.ego.a_m)
        self._sum_velocity += self.ego.v_m

        obs, (p2, p1, f1, f2) = self._observe()
        breakdown = step_breakdown(
            d_m=self.ego.d_m,
            v_m=self.ego.v_m,
            a_m=self.ego.a_m,
            prev_a_m=self.ego.prev_a_m,
            d_p1=p1.d,
            v_p1=p1.v,
            d_f1=f1.d,
            v_f1=f1.v,
            a_f1=f1.a,
            f1_is_virtual=f1.is_virtual,
            outcome_kind=kind.value if kind is not None else None,
            weights=self.weights,
            zone_end=self.cfg.control_zone_end,
            merge_point=0.0,
            a_norm=self._a_norm,
            dt=self.cfg.dt,
            l_p1=p1.length,
            l_m=self.cfg.vehicle_length,
        )

        outcome = None
        if kind is not None:
            self._done = True
            outcome = EpisodeOutcome(
                kind=kind,
                steps=self._steps,
                mean_abs_jerk=self._sum_abs_jerk / self._steps,
                mean_abs_accel=self._sum_abs_accel / self._steps,
                mean_velocity=self._sum_velocity / self._steps,
            )

        self.last_step_info = {
            "episode": self.episode_index,
            "step": self._steps,
            "t": self._steps * self.cfg.dt,
            "jerk": jerk,
            "obs": obs,
            "is_virtual": (
                (VIRTUAL_P2 if p2.is_virtual else 0)
                | (VIRTUAL_P1 if p1.is_virtual else 0)
                | (VIRTUAL_F1 if f1.is_virtual else 0)
                | (VIRTUAL_F2 if f2.is_virtual else 0)
            ),
        }
        return obs, breakdown, kind is not None, outcome

    @property
    def done(self) -> bool:
        return self._done

    @property
    def steps(self) -> int:
        return self._steps

    def real_vehicle_positions(self) -> list[tuple[int, float]]:
        """(id, d) of every real main-road vehicle, used by merge tracking."""
        return [(veh.id, veh.d) for veh in self.traffic.vehicles]

    # -- internals -----------------------------------------------------------

    def _sensed_vehicles(self) -> list[VehicleState]:
        d_m = self.ego.d_m
        radius = self.cfg.sensing_radius
        return [veh for veh in self.traffic.vehicles if abs(veh.d - d_m) <= radius]

    def _observe(self):
        quad = neighbors(
            self.ego.d_m,
            self._sensed_vehicles(),
            sensing_radius=self.cfg.sensing_radius,
            speed_limit=self.cfg.speed_limit,
            length=self.cfg.vehicle_length,
        )
        return build_observation(self.ego, *quad), quad

    # -- checkpoint support (between episodes only) ---------------------------

    def state_dict(self) -> dict:
        if self._rng is None:
            raise RuntimeError("environment has no state yet; reset it first")
        if not self._done:
            raise RuntimeError("environment state can only be captured between episodes")
        return {
            "rng": self._rng.bit_generator.state,
            "traffic": self.traffic.state_dict(),
            "episode_index": self.episode_index,
        }

    def load_state_dict(self, state: dict) -> None:
        self._rng = np.random.default_rng()
        self._rng.bit_generator.state = state["rng"]
        self.traffic = TrafficSim(self.traffic_cfg, self.cfg, self._rng)
        self.traffic.load_state_dict(state["traffic"])
        self.episode_index = state["episode_index"]
        self.ego = None
        self._done = True
