"""Per-step multi-objective reward: midway positioning, follower braking,
jerk comfort, and terminal events.

All functions are pure. Positional gating (which terms are active where) is
applied by :func:`step_breakdown`; the individual terms only evaluate their
formulas.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .config import RewardWeights

# Terminal outcome keys as used across the package.
STOP = "stop"
COLLISION = "collision"
SUCCESS = "success"
TRUNCATED = "truncated"


@dataclass(frozen=True, slots=True)
class RewardBreakdown:
    """Decomposition of one step's reward; ``total`` is the exact sum."""

    r_m: float = 0.0
    r_b: float = 0.0
    r_j: float = 0.0
    r_terminal: float = 0.0

    @property
    def total(self) -> float:
        return self.r_m + self.r_b + self.r_j + self.r_terminal


def midway_ratio(
    d_p1: float, d_m: float, d_f1: float, l_p1: float = 5.0, l_m: float = 5.0
) -> float:
    """Normalized front/rear gap asymmetry of the ego between its neighbors.

    Computed as (front_gap - rear_gap) / (front_gap + rear_gap) with
    bumper-to-bumper gaps; 0 at equal gaps, magnitude 1 at contact with
    either neighbor. A degenerate denominator (neighbors bumper-to-bumper)
    saturates at magnitude 1.
    """
    front_gap = (d_m - d_p1) - l_p1
    rear_gap = (d_f1 - d_m) - l_m
    denom = front_gap + rear_gap
    num = front_gap - rear_gap
    if denom <= 0.0:
        return math.copysign(1.0, num)
    w = num / denom
    if w > 1.0:
        return 1.0
    if w < -1.0:
        return -1.0
    return w


def merge_midway_reward(
    w: float, v_p1: float, v_f1: float, v_m: float, weights: RewardWeights
) -> float:
    """Penalty for being off-center or off the neighbors' mean speed."""
    speed_dev = abs((v_p1 + v_f1) / 2.0 - v_m) / weights.delta_v_max
    return -weights.w_m * (abs(w) + speed_dev)


def braking_penalty(a_f1: float, weights: RewardWeights, a_norm: float = 4.5) -> float:
    """Penalty proportional to the first follower's braking magnitude.

    ``a_norm`` is max(|a_min|, a_max) of the normal acceleration range.
    Non-braking accelerations cost nothing.
    """
    if a_f1 >= 0.0:
        return 0.0
    return -weights.w_b * abs(a_f1) / a_norm


def jerk_penalty(
    a_m: float, prev_a_m: float, weights: RewardWeights, dt: float = 0.1
) -> float:
    """Penalty on the backward-difference jerk of the applied acceleration."""
    jerk = (a_m - prev_a_m) / dt
    return -weights.w_j * abs(jerk) / weights.j_max


def terminal_reward(kind: str | None, weights: RewardWeights) -> float:
    """Terminal reward for an episode outcome; non-terminal and truncated
    steps earn nothing."""
    if kind is None or kind == TRUNCATED:
        return 0.0
    if kind == STOP:
        return weights.stop_penalty
    if kind == COLLISION:
        return weights.collision_penalty
    if kind == SUCCESS:
        return weights.success_reward
    raise ValueError(f"unknown outcome kind: {kind!r}")


def step_breakdown(
    d_m: float,
    v_m: float,
    a_m: float,
    prev_a_m: float,
    d_p1: float,
    v_p1: float,
    d_f1: float,
    v_f1: float,
    a_f1: float,
    f1_is_virtual: bool,
    outcome_kind: str | None,
    weights: RewardWeights,
    zone_end: float = -100.0,
    merge_point: float = 0.0,
    a_norm: float = 4.5,
    dt: float = 0.1,
    l_p1: float = 5.0,
    l_m: float = 5.0,
) -> RewardBreakdown:
    """Assemble the full step reward from the post-step state.

    The midway term is active only between the merge point and the control
    zone end; the braking term anywhere in the control zone with a real first
    follower; the jerk term at every control step.
    """
    r_m = 0.0
    if zone_end < d_m <= merge_point:
        w = midway_ratio(d_p1, d_m, d_f1, l_p1, l_m)
        r_m = merge_midway_reward(w, v_p1, v_f1, v_m, weights)
    r_b = 0.0
    if d_m > zone_end and not f1_is_virtual:
        r_b = braking_penalty(a_f1, weights, a_norm)
    r_j = jerk_penalty(a_m, prev_a_m, weights, dt)
    r_t = terminal_reward(outcome_kind, weights)
    return RewardBreakdown(r_m=r_m, r_b=r_b, r_j=r_j, r_terminal=r_t)
