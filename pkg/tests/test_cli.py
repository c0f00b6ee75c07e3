"""Command-line interface tests: exit codes, flag overrides, output
artifacts, and run recreatability."""

import yaml

from rampmerge.cli import EXIT_CONFIG, EXIT_INTEGRITY, EXIT_OK, main
from rampmerge.logs import read_csv_rows, read_metrics_json


def write_cfg(tmp_path, text=""):
    path = tmp_path / "cfg.yaml"
    path.write_text(text)
    return path


def tiny_train_cfg(tmp_path, extra=""):
    return write_cfg(
        tmp_path,
        "agent:\n  total_steps: 250\n  checkpoint_every: 1000000\n" + extra,
    )


class TestErrors:
    def test_missing_config_file(self, tmp_path, capsys):
        code = main(["train", "--config", str(tmp_path / "none.yaml")])
        assert code == EXIT_CONFIG
        assert "config file not found" in capsys.readouterr().err

    def test_invalid_bound_names_field(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, "env:\n  a_max: 5\n")
        code = main(["train", "--config", str(cfg), "--out", str(tmp_path / "o")])
        assert code == EXIT_CONFIG
        err = capsys.readouterr().err
        assert "env.a_max" in err and "2.6" in err

    def test_corrupt_checkpoint_is_integrity_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.ckpt"
        bad.write_bytes(b"garbage-not-a-checkpoint")
        code = main([
            "eval", "--checkpoint", str(bad), "--steps", "10",
            "--out", str(tmp_path / "o"),
        ])
        assert code == EXIT_INTEGRITY
        assert "checkpoint" in capsys.readouterr().err

    def test_missing_checkpoint_flag_is_usage_error(self, tmp_path, capsys):
        try:
            main(["eval", "--out", str(tmp_path / "o")])
        except SystemExit as exc:
            assert exc.code == 2
        else:
            raise AssertionError("argparse should reject a missing --checkpoint")

    def test_empty_sweep_weights_rejected(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, "run:\n  sweep_weights: []\n")
        code = main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "o")])
        assert code == EXIT_CONFIG
        assert "sweep_weights" in capsys.readouterr().err


class TestTrainCommand:
    def test_artifacts_and_determinism(self, tmp_path, capsys):
        cfg = tiny_train_cfg(tmp_path)
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert main(["train", "--config", str(cfg), "--seed", "3", "--out", str(out_a)]) == EXIT_OK
        assert main(["train", "--config", str(cfg), "--seed", "3", "--out", str(out_b)]) == EXIT_OK
        for out in (out_a, out_b):
            assert (out / "config.yaml").exists()
            assert (out / "training_log.csv").exists()
            assert (out / "checkpoint.ckpt").exists()
        assert (out_a / "training_log.csv").read_bytes() == (out_b / "training_log.csv").read_bytes()
        assert (out_a / "checkpoint.ckpt").read_bytes() == (out_b / "checkpoint.ckpt").read_bytes()

    def test_config_echo_reproduces_run(self, tmp_path):
        cfg = tiny_train_cfg(tmp_path)
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert main(["train", "--config", str(cfg), "--seed", "5", "--out", str(out_a)]) == EXIT_OK
        # rerun purely from the echoed config
        echoed = yaml.safe_load((out_a / "config.yaml").read_text())
        assert echoed["run"]["seed"] == 5
        assert main(["train", "--config", str(out_a / "config.yaml"), "--out", str(out_b)]) == EXIT_OK
        assert (out_a / "training_log.csv").read_bytes() == (out_b / "training_log.csv").read_bytes()

    def test_steps_flag_overrides(self, tmp_path):
        cfg = tiny_train_cfg(tmp_path)
        out = tmp_path / "o"
        assert main([
            "train", "--config", str(cfg), "--seed", "1", "--steps", "60",
            "--out", str(out),
        ]) == EXIT_OK
        echoed = yaml.safe_load((out / "config.yaml").read_text())
        assert echoed["agent"]["total_steps"] == 60

    def test_resume_from_checkpoint(self, tmp_path):
        cfg = tiny_train_cfg(tmp_path)
        full, p1, p2 = tmp_path / "full", tmp_path / "p1", tmp_path / "p2"
        assert main([
            "train", "--config", str(cfg), "--seed", "6", "--steps", "500",
            "--out", str(full),
        ]) == EXIT_OK
        assert main([
            "train", "--config", str(cfg), "--seed", "6", "--steps", "250",
            "--out", str(p1),
        ]) == EXIT_OK
        assert main([
            "train", "--config", str(cfg), "--seed", "6", "--steps", "500",
            "--out", str(p2), "--checkpoint", str(p1 / "checkpoint.ckpt"),
        ]) == EXIT_OK
        assert (full / "checkpoint.ckpt").read_bytes() == (p2 / "checkpoint.ckpt").read_bytes()


class TestEvalCommand:
    def run_train(self, tmp_path):
        cfg = tiny_train_cfg(tmp_path)
        out = tmp_path / "train_out"
        assert main(["train", "--config", str(cfg), "--seed", "2", "--out", str(out)]) == EXIT_OK
        return cfg, out / "checkpoint.ckpt"

    def test_metrics_files_written(self, tmp_path, capsys):
        cfg, ckpt = self.run_train(tmp_path)
        out = tmp_path / "eval_out"
        code = main([
            "eval", "--config", str(cfg), "--checkpoint", str(ckpt),
            "--steps", "300", "--out", str(out),
        ])
        assert code == EXIT_OK
        metrics = read_metrics_json(out / "metrics.json")
        assert metrics["episodes"] > 0
        rows = read_csv_rows(out / "metrics.csv")
        assert len(rows) == 1

    def test_episodes_log_count(self, tmp_path):
        cfg, ckpt = self.run_train(tmp_path)
        out = tmp_path / "eval_out"
        code = main([
            "eval", "--config", str(cfg), "--checkpoint", str(ckpt),
            "--steps", "1500", "--out", str(out), "--episodes-log", "3",
        ])
        assert code == EXIT_OK
        logs = sorted(out.glob("episode_*.csv"))
        assert len(logs) == 3
        assert (out / "spawns.csv").exists()
        rows = read_csv_rows(logs[0])
        assert rows[-1]["done"] == "1"

    def test_eval_is_reproducible(self, tmp_path):
        cfg, ckpt = self.run_train(tmp_path)
        out_a, out_b = tmp_path / "ea", tmp_path / "eb"
        for out in (out_a, out_b):
            assert main([
                "eval", "--config", str(cfg), "--checkpoint", str(ckpt),
                "--steps", "300", "--out", str(out),
            ]) == EXIT_OK
        assert (out_a / "metrics.json").read_bytes() == (out_b / "metrics.json").read_bytes()


class TestSweepCommand:
    def test_subdirectories_and_table(self, tmp_path):
        cfg = write_cfg(
            tmp_path,
            "agent:\n  total_steps: 200\n  checkpoint_every: 1000000\n"
            "run:\n  sweep_weights: [0.0, 0.00075, 0.0015]\n  test_steps: 150\n",
        )
        out = tmp_path / "sweep_out"
        assert main(["sweep", "--config", str(cfg), "--seed", "4", "--out", str(out)]) == EXIT_OK
        rows = read_csv_rows(out / "pareto.csv")
        assert [float(r["w_j"]) for r in rows] == [0.0, 0.00075, 0.0015]
        assert all(r["status"] == "ok" for r in rows)
        for name in ("wj_0", "wj_0.00075", "wj_0.0015"):
            assert (out / name / "metrics.json").exists()
            assert (out / name / "seed_4" / "checkpoint.ckpt").exists()

    def test_parallel_matches_serial(self, tmp_path):
        cfg = write_cfg(
            tmp_path,
            "agent:\n  total_steps: 200\n  checkpoint_every: 1000000\n"
            "run:\n  sweep_weights: [0.0, 0.003]\n  test_steps: 150\n",
        )
        out_a, out_b = tmp_path / "s1", tmp_path / "s2"
        assert main(["sweep", "--config", str(cfg), "--out", str(out_a)]) == EXIT_OK
        assert main([
            "sweep", "--config", str(cfg), "--out", str(out_b), "--parallel", "2",
        ]) == EXIT_OK
        assert (out_a / "pareto.csv").read_bytes() == (out_b / "pareto.csv").read_bytes()
