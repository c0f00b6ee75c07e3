"""Main-road traffic: IDM car following, emergency braking, and spawning.

Positions use the distance-to-merge-point coordinate ``d`` (measured from the
front bumper, positive before the merge point, negative after), so vehicles
advance by decreasing ``d``. The vehicle deque is kept sorted ascending in
``d``: index 0 is the most downstream vehicle and new spawns append upstream.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .config import EnvConfig, TrafficConfig

# Gap floor used only for the follower-vs-ego pairing: an overlapping ego is a
# collision in the making, but the follower still needs a finite IDM demand.
_EGO_GAP_FLOOR = 0.01


@dataclass(slots=True)
class IdmParams:
    """Per-vehicle IDM parameters, drawn once at spawn and fixed thereafter."""

    v0: float           # desired speed, m/s
    T: float            # time headway, s
    s0: float = 2.0     # minimum gap, m
    a: float = 1.5      # maximum acceleration, m/s^2
    b: float = 2.0      # comfortable deceleration, m/s^2
    delta: float = 4.0


@dataclass(slots=True)
class VehicleState:
    """One road user's longitudinal state.

    ``d`` is the distance to the merge point from the front bumper. Virtual
    vehicles are observation-only placeholders: they never move, brake, or
    take part in collision checks.
    """

    id: int
    d: float
    v: float
    a: float = 0.0
    length: float = 5.0
    idm: IdmParams | None = None
    is_virtual: bool = False

    @property
    def desired_speed(self) -> float | None:
        return None if self.idm is None else self.idm.v0


def idm_acceleration(v: float, params: IdmParams, gap: float, approach_rate: float) -> float:
    """Raw IDM acceleration demand for speed ``v`` behind a leader.

    ``gap`` is the bumper-to-bumper distance (``math.inf`` on a free road,
    with ``approach_rate`` 0); ``approach_rate`` is own speed minus leader
    speed. The desired-gap term is floored at ``s0`` so an opening gap cannot
    push it negative. The returned demand is unclamped; pass it through
    :func:`emergency_braking` to get the applied acceleration.
    """
    if gap <= 0.0 and not math.isinf(gap):
        raise ValueError(f"non-positive gap {gap} with a real leader (ordering bug upstream)")
    s_star = params.s0 + v * params.T + v * approach_rate / (2.0 * math.sqrt(params.a * params.b))
    if s_star < params.s0:
        s_star = params.s0
    interaction = 0.0 if math.isinf(gap) else (s_star / gap) ** 2
    return params.a * (1.0 - (v / params.v0) ** params.delta - interaction)


def select_leader(
    vehicle: VehicleState,
    vehicles,
    ego_d: float | None = None,
    ego_v: float = 0.0,
    junction_length: float = 10.0,
    ego_length: float = 5.0,
) -> tuple[float, float] | None:
    """Effective leader of one main-road vehicle as ``(gap, approach_rate)``.

    The nearest real vehicle ahead leads. When the ego projection is inside
    the junction or already on the main road, it competes as a leader
    candidate for any vehicle behind it; the nearer candidate wins. Returns
    None on a free road.
    """
    main = None
    for other in vehicles:
        if other is vehicle or other.is_virtual:
            continue
        if other.d < vehicle.d and (main is None or other.d > main.d):
            main = other
    gap = dv = None
    if main is not None:
        gap = (vehicle.d - main.d) - main.length
        dv = vehicle.v - main.v
    if ego_d is not None and ego_d <= junction_length and vehicle.d > ego_d:
        ego_gap = (vehicle.d - ego_d) - ego_length
        if ego_gap < _EGO_GAP_FLOOR:
            ego_gap = _EGO_GAP_FLOOR
        if gap is None or ego_gap < gap:
            gap = ego_gap
            dv = vehicle.v - ego_v
    if gap is None:
        return None
    return gap, dv


def emergency_braking(
    demand: float,
    a_max: float = 2.6,
    normal_floor: float = -4.5,
    emergency_floor: float = -9.0,
) -> float:
    """Applied acceleration for an IDM demand.

    Demands within the normal range pass through; a demand below the normal
    floor is an emergency and is allowed down to the emergency floor.
    """
    if demand < normal_floor:
        return demand if demand > emergency_floor else emergency_floor
    return demand if demand < a_max else a_max


class TrafficSim:
    """Owns the main-road vehicle population and advances it one step at a time.

    Driven by a single environment instance; the RNG is shared with the
    environment so one seed determines the whole run.
    """

    def __init__(self, traffic_cfg: TrafficConfig, env_cfg: EnvConfig, rng: np.random.Generator):
        self.cfg = traffic_cfg
        self.env_cfg = env_cfg
        self.rng = rng
        self.vehicles: deque[VehicleState] = deque()
        self.t_steps = 0
        self._next_id = 0
        self.spawn_attempts = 0
        self.spawn_accepts = 0
        self.spawn_placed = 0
        self.last_min_gap = math.inf
        self.min_gap_seen = math.inf
        self.spawn_hook = None  # callable(vehicle, t_steps), used for spawn logging

    def clear(self) -> None:
        self.vehicles.clear()
        self.t_steps = 0
        self.last_min_gap = math.inf
        self.min_gap_seen = math.inf

    def step(self, ego_d: float | None = None, ego_v: float = 0.0) -> None:
        """Advance all main-road vehicles by one time step.

        Accelerations are computed synchronously from the current state (the
        ego at its pre-integration position), then every vehicle is moved with
        the same explicit Euler update as the ego. When the ego is inside the
        junction or on the main road, it is a leader candidate for the vehicle
        immediately behind its projection; the nearer of that candidate and
        the vehicle's own main-road leader wins.
        """
        env_cfg = self.env_cfg
        dt = env_cfg.dt
        a_max = env_cfg.a_max
        normal_floor = env_cfg.a_min
        emergency_floor = self.cfg.emergency_decel
        ego_active = ego_d is not None and ego_d <= env_cfg.junction_length
        ego_length = env_cfg.vehicle_length

        vehicles = self.vehicles
        accels = []
        min_gap = math.inf
        prev = None
        for veh in vehicles:
            if prev is None:
                gap, dv = math.inf, 0.0
            else:
                gap = (veh.d - prev.d) - prev.length
                if gap <= 0.0:
                    raise RuntimeError(
                        f"main-road ordering violated: vehicle {veh.id} has gap {gap:.3f} m "
                        f"to leader {prev.id}"
                    )
                if gap < min_gap:
                    min_gap = gap
                dv = veh.v - prev.v
            if ego_active and veh.d > ego_d and (prev is None or prev.d <= ego_d):
                ego_gap = (veh.d - ego_d) - ego_length
                if ego_gap < gap:
                    gap = ego_gap if ego_gap > _EGO_GAP_FLOOR else _EGO_GAP_FLOOR
                    dv = veh.v - ego_v
            demand = idm_acceleration(veh.v, veh.idm, gap, dv)
            accels.append(emergency_braking(demand, a_max, normal_floor, emergency_floor))
            prev = veh

        for veh, acc in zip(vehicles, accels):
            veh.a = acc
            veh.d -= veh.v * dt          # position advances with pre-update speed
            new_v = veh.v + acc * dt
            veh.v = new_v if new_v > 0.0 else 0.0

        removal = env_cfg.removal_distance
        while vehicles and vehicles[0].d < removal:
            vehicles.popleft()

        self.t_steps += 1
        if self.t_steps % self.cfg.spawn_period_steps == 0:
            self.spawn_step()

        self.last_min_gap = min_gap
        if min_gap < self.min_gap_seen:
            self.min_gap_seen = min_gap

    def spawn_step(self) -> VehicleState | None:
        """One Bernoulli spawn attempt at the main-road entry point.

        A win creates a vehicle with freshly drawn per-vehicle parameters
        unless the entry gap is unsafe (below s0 + vehicle length), in which
        case the spawn is suppressed. Entry speed is the desired speed capped
        so the newcomer could comfortably brake within the available gap.
        """
        cfg = self.cfg
        env_cfg = self.env_cfg
        self.spawn_attempts += 1
        if self.rng.random() >= cfg.spawn_probability:
            return None
        self.spawn_accepts += 1

        leader = self.vehicles[-1] if self.vehicles else None
        if leader is not None:
            entry_gap = (env_cfg.spawn_distance - leader.d) - leader.length
            if entry_gap < cfg.min_gap + env_cfg.vehicle_length:
                return None
        else:
            entry_gap = math.inf

        factor = float(
            np.clip(
                self.rng.normal(cfg.speed_factor_mean, cfg.speed_factor_std),
                cfg.speed_factor_min,
                cfg.speed_factor_max,
            )
        )
        headway = float(self.rng.uniform(cfg.headway_min, cfg.headway_max))
        params = IdmParams(
            v0=env_cfg.speed_limit * factor,
            T=headway,
            s0=cfg.min_gap,
            a=cfg.max_accel,
            b=cfg.comfort_decel,
            delta=cfg.delta,
        )
        if leader is None:
            speed = params.v0
        else:
            brakeable = math.sqrt(2.0 * params.b * max(0.0, entry_gap - params.s0))
            speed = min(params.v0, leader.v + brakeable)
        veh = VehicleState(
            id=self._next_id,
            d=env_cfg.spawn_distance,
            v=speed,
            a=0.0,
            length=env_cfg.vehicle_length,
            idm=params,
        )
        self._next_id += 1
        self.vehicles.append(veh)
        self.spawn_placed += 1
        if self.spawn_hook is not None:
            self.spawn_hook(veh, self.t_steps)
        return veh

    # -- checkpoint support -------------------------------------------------

    def state_dict(self) -> dict:
        return {
            "t_steps": self.t_steps,
            "next_id": self._next_id,
            "spawn_attempts": self.spawn_attempts,
            "spawn_accepts": self.spawn_accepts,
            "spawn_placed": self.spawn_placed,
            "vehicles": [
                [v.id, v.d, v.v, v.a, v.length, v.idm.v0, v.idm.T, v.idm.s0, v.idm.a, v.idm.b, v.idm.delta]
                for v in self.vehicles
            ],
        }

    def load_state_dict(self, state: dict) -> None:
        self.t_steps = state["t_steps"]
        self._next_id = state["next_id"]
        self.spawn_attempts = state["spawn_attempts"]
        self.spawn_accepts = state["spawn_accepts"]
        self.spawn_placed = state["spawn_placed"]
        self.vehicles = deque(
            VehicleState(
                id=row[0], d=row[1], v=row[2], a=row[3], length=row[4],
                idm=IdmParams(v0=row[5], T=row[6], s0=row[7], a=row[8], b=row[9], delta=row[10]),
            )
            for row in state["vehicles"]
        )
        self.last_min_gap = math.inf
        self.min_gap_seen = math.inf
