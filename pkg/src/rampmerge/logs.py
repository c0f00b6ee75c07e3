"""File interfaces: trajectory CSV, spawn sidecar, metrics JSON/CSV, Pareto
table, and training-log readers.

Floats are written with ``repr`` (shortest round-trip form) so identical runs
produce byte-identical files.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

from .env import (
    OBS_A_M, OBS_D_F1, OBS_D_F2, OBS_D_M, OBS_D_P1, OBS_D_P2,
    OBS_V_F1, OBS_V_F2, OBS_V_M, OBS_V_P1, OBS_V_P2,
)

TRAJECTORY_COLUMNS = [
    "episode", "step", "t", "d_m", "v_m", "a_m", "jerk",
    "d_p2", "v_p2", "d_p1", "v_p1", "d_f1", "v_f1", "d_f2", "v_f2",
    "r_total", "r_m", "r_b", "r_j", "r_terminal", "done", "outcome", "is_virtual",
]

SPAWN_COLUMNS = ["episode", "t", "id", "v0", "T"]

METRICS_COLUMNS = [
    "w_j", "collision_rate", "avg_jerk", "avg_accel", "avg_velocity",
    "merge_ahead_rate", "merge_behind_rate", "stops", "episodes",
]

PARETO_COLUMNS = METRICS_COLUMNS + ["status"]

TRAINING_LOG_COLUMNS = ["episode", "steps", "undiscounted_reward", "outcome"]


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


class TrajectoryWriter:
    """One CSV row per environment step, in physical units."""

    def __init__(self, path: str | Path):
        self._fh = open(path, "w", encoding="utf-8", newline="")
        self._writer = csv.writer(self._fh)
        self._writer.writerow(TRAJECTORY_COLUMNS)

    def record(self, env, breakdown, done: bool, outcome) -> None:
        info = env.last_step_info
        obs = info["obs"]
        row = [
            info["episode"], info["step"], _fmt(info["t"]),
            _fmt(float(obs[OBS_D_M])), _fmt(float(obs[OBS_V_M])), _fmt(float(obs[OBS_A_M])),
            _fmt(info["jerk"]),
            _fmt(float(obs[OBS_D_P2])), _fmt(float(obs[OBS_V_P2])),
            _fmt(float(obs[OBS_D_P1])), _fmt(float(obs[OBS_V_P1])),
            _fmt(float(obs[OBS_D_F1])), _fmt(float(obs[OBS_V_F1])),
            _fmt(float(obs[OBS_D_F2])), _fmt(float(obs[OBS_V_F2])),
            _fmt(breakdown.total), _fmt(breakdown.r_m), _fmt(breakdown.r_b),
            _fmt(breakdown.r_j), _fmt(breakdown.r_terminal),
            int(done), outcome.kind.value if outcome is not None else "",
            info["is_virtual"],
        ]
        self._writer.writerow(row)

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class SpawnLogWriter:
    """Sidecar CSV with one row per spawned main-road vehicle."""

    def __init__(self, path: str | Path, dt: float = 0.1):
        self._fh = open(path, "w", encoding="utf-8", newline="")
        self._writer = csv.writer(self._fh)
        self._writer.writerow(SPAWN_COLUMNS)
        self._dt = dt

    def make_hook(self, env):
        """Returns a callable suitable for ``TrafficSim.spawn_hook``."""

        def hook(vehicle, t_steps):
            self._writer.writerow(
                [
                    env.episode_index,
                    _fmt(t_steps * self._dt),
                    vehicle.id,
                    _fmt(vehicle.idm.v0),
                    _fmt(vehicle.idm.T),
                ]
            )

        return hook

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def metrics_row(w_j: float, metrics) -> dict:
    return {
        "w_j": w_j,
        "collision_rate": metrics.avg_collision_rate,
        "avg_jerk": metrics.avg_jerk,
        "avg_accel": metrics.avg_accel,
        "avg_velocity": metrics.avg_velocity,
        "merge_ahead_rate": metrics.merge_ahead_rate,
        "merge_behind_rate": metrics.merge_behind_rate,
        "stops": metrics.stop_count,
        "episodes": metrics.episode_count,
    }


def write_metrics_json(path: str | Path, row: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(row, fh, sort_keys=True, indent=2)
        fh.write("\n")


def read_metrics_json(path: str | Path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def write_metrics_csv(path: str | Path, rows: list[dict], columns=None) -> None:
    columns = columns or METRICS_COLUMNS
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in columns])


def read_csv_rows(path: str | Path) -> list[dict]:
    """Generic reader: all values come back as strings."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def write_pareto_csv(path: str | Path, points) -> None:
    rows = []
    for point in points:
        row = metrics_row(point.w_j, point.metrics)
        row["status"] = point.status
        rows.append(row)
    write_metrics_csv(path, rows, columns=PARETO_COLUMNS)


def read_training_log(path: str | Path) -> list[dict]:
    rows = []
    for raw in read_csv_rows(path):
        rows.append(
            {
                "episode": int(raw["episode"]),
                "steps": int(raw["steps"]),
                "undiscounted_reward": float(raw["undiscounted_reward"]),
                "outcome": raw["outcome"],
            }
        )
    return rows
