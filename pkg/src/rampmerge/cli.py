"""Command-line entry point: train, eval, and sweep subcommands.

Every run writes a resolved config echo into its output directory so the run
can be recreated from the directory alone. Exit codes: 0 success, 2 config
error, 3 runtime error, 4 checkpoint integrity error.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from .checkpoint import CheckpointError
from .config import ConfigError, RunConfig, load_config, save_config, validate_config
from .ddpg import load_training_checkpoint, train
from .env import MergingEnv
from .evaluate import pareto_sweep, run_test, weight_dirname
from .logs import (
    SpawnLogWriter, TrajectoryWriter, metrics_row,
    write_metrics_csv, write_metrics_json, write_pareto_csv,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
EXIT_INTEGRITY = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rampmerge",
        description="On-ramp merging: train, test, and sweep longitudinal control policies.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    train_p = sub.add_parser("train", help="train a policy and write checkpoint + training log")
    eval_p = sub.add_parser("eval", help="test a trained policy and write metrics")
    sweep_p = sub.add_parser("sweep", help="train/test one policy per jerk-penalty weight")

    for p in (train_p, eval_p, sweep_p):
        p.add_argument("--config", type=Path, default=None, help="YAML config file")
        p.add_argument("--seed", type=int, default=None, help="override run.seed")
        p.add_argument("--out", type=Path, default=None, help="output directory")

    train_p.add_argument("--steps", type=int, default=None, help="training step budget")
    train_p.add_argument("--checkpoint", type=Path, default=None,
                         help="resume training from this checkpoint")

    eval_p.add_argument("--steps", type=int, default=None, help="testing step budget")
    eval_p.add_argument("--checkpoint", type=Path, required=True,
                        help="trained checkpoint to evaluate")
    eval_p.add_argument("--episodes-log", type=int, default=None,
                        help="number of episodes to log as trajectory CSVs")

    sweep_p.add_argument("--steps", type=int, default=None,
                         help="training step budget per weight")
    sweep_p.add_argument("--parallel", type=int, default=None,
                         help="number of concurrent runs")
    return parser


def _load_with_overrides(args) -> RunConfig:
    if args.config is not None:
        cfg = load_config(args.config)
    else:
        cfg = RunConfig()
    if args.seed is not None:
        cfg.run.seed = args.seed
    if getattr(args, "steps", None) is not None:
        if args.command == "eval":
            cfg.run.test_steps = args.steps
        else:
            cfg.agent = dataclasses.replace(cfg.agent, total_steps=args.steps)
    if getattr(args, "episodes_log", None) is not None:
        cfg.run.episodes_log = args.episodes_log
    if getattr(args, "parallel", None) is not None:
        cfg.run.parallel = args.parallel
    if args.out is not None:
        cfg.run.out_dir = str(args.out)
    if getattr(args, "checkpoint", None) is not None:
        cfg.run.checkpoint = str(args.checkpoint)
    validate_config(cfg)
    return cfg


def _out_dir(cfg: RunConfig, command: str) -> Path:
    out = Path(cfg.run.out_dir) if cfg.run.out_dir else Path("runs") / command
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_train(cfg: RunConfig) -> int:
    out = _out_dir(cfg, "train")
    save_config(cfg, out / "config.yaml")
    env = MergingEnv(cfg.env, cfg.traffic, cfg.reward)
    result = train(env, cfg.agent, seed=cfg.run.seed, out_dir=out, resume=cfg.run.checkpoint)
    print(
        f"trained {result.global_steps} steps over {len(result.episodes)} episodes; "
        f"artifacts in {out}"
    )
    return EXIT_OK


def cmd_eval(cfg: RunConfig) -> int:
    out = _out_dir(cfg, "eval")
    save_config(cfg, out / "config.yaml")
    env = MergingEnv(cfg.env, cfg.traffic, cfg.reward)
    agent, _, _ = load_training_checkpoint(cfg.run.checkpoint, cfg.agent, cfg.env)

    to_log = cfg.run.episodes_log
    writers: list[TrajectoryWriter] = []
    spawn_writer = None
    state = {"current": None, "logged": 0}

    if to_log > 0:
        spawn_writer = SpawnLogWriter(out / "spawns.csv", dt=cfg.env.dt)
        env.spawn_hook = spawn_writer.make_hook(env)

        def step_hook(env_, obs, breakdown, done, outcome):
            if state["current"] is None and env_.steps == 1 and state["logged"] < to_log:
                state["logged"] += 1
                writer = TrajectoryWriter(out / f"episode_{state['logged']:04d}.csv")
                writers.append(writer)
                state["current"] = writer
            if state["current"] is not None:
                state["current"].record(env_, breakdown, done, outcome)
                if done:
                    state["current"].close()
                    state["current"] = None
    else:
        step_hook = None

    try:
        metrics, _ = run_test(
            agent, env, cfg.run.test_steps, cfg.resolved_test_seed(), step_hook=step_hook
        )
    finally:
        for writer in writers:
            writer.close()
        if spawn_writer is not None:
            spawn_writer.close()

    row = metrics_row(cfg.reward.w_j, metrics)
    write_metrics_json(out / "metrics.json", row)
    write_metrics_csv(out / "metrics.csv", [row])
    print(
        f"tested {metrics.episode_count} episodes: collision_rate="
        f"{metrics.avg_collision_rate:.4f} avg_jerk={metrics.avg_jerk:.3f} "
        f"ahead={metrics.merge_ahead_rate:.3f} behind={metrics.merge_behind_rate:.3f}"
    )
    return EXIT_OK


def cmd_sweep(cfg: RunConfig) -> int:
    if not cfg.run.sweep_weights:
        raise ConfigError("run.sweep_weights: may not be empty for sweep")
    seeds = cfg.run.sweep_seeds or [cfg.run.seed]
    out = _out_dir(cfg, "sweep")
    save_config(cfg, out / "config.yaml")
    points = pareto_sweep(
        cfg.run.sweep_weights,
        train_steps=cfg.agent.total_steps,
        test_steps=cfg.run.test_steps,
        seeds=seeds,
        cfg=cfg,
        out_dir=out,
        parallel=cfg.run.parallel,
    )
    for point in points:
        weight_dir = out / weight_dirname(point.w_j)
        weight_dir.mkdir(parents=True, exist_ok=True)
        row = metrics_row(point.w_j, point.metrics)
        write_metrics_json(weight_dir / "metrics.json", row)
        for seed, seed_metrics in zip(point.seeds, point.per_seed):
            write_metrics_json(
                weight_dir / f"seed_{seed}" / "metrics.json",
                metrics_row(point.w_j, seed_metrics),
            )
    write_pareto_csv(out / "pareto.csv", points)
    failed = [p for p in points if p.status != "ok"]
    print(f"swept {len(points)} weights ({len(failed)} with failures); table in {out / 'pareto.csv'}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _load_with_overrides(args)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "eval":
            return cmd_eval(cfg)
        return cmd_sweep(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CheckpointError as exc:
        print(f"checkpoint error: {exc}", file=sys.stderr)
        return EXIT_INTEGRITY
    except Exception as exc:  # noqa: BLE001 - map any runtime failure to one exit code
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
