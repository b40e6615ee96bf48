"""Command-line interface: exit codes, CSV outputs, pipeline smoke."""

import csv

import pytest

from sparseprop.cli import GRADCHECK_HEADER, main


class TestExitCodes:
    def test_unknown_flag_is_usage_error(self, capsys):
        assert main(["gradcheck", "--bogus"]) == 2

    def test_missing_subcommand(self, capsys):
        assert main([]) == 2

    def test_runtime_error_is_one(self, tmp_path, capsys):
        bad = tmp_path / "bad.spikes"
        bad.write_text("not a spikes file\n")
        assert main(["train", "--data", str(bad)]) == 1

    def test_gen_data_without_out(self, capsys):
        assert main(["gen-data"]) == 2


class TestGradcheck:
    def test_csv_row_and_exactness(self, tmp_path, capsys):
        out = tmp_path / "gc.csv"
        code = main(["gradcheck", "--neuron", "lif", "--hidden", "16",
                     "--steps", "20", "--inputs", "10", "--classes", "3",
                     "--precision", "f64", "--out", str(out)])
        assert code == 0
        with open(out) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == GRADCHECK_HEADER
        assert float(rows[1][5]) <= 1e-10


class TestPipeline:
    def test_gen_data_then_train(self, tmp_path, capsys):
        data = tmp_path / "ds.spikes"
        metrics = tmp_path / "metrics.csv"
        assert main(["gen-data", "--samples", "4", "--channels", "10",
                     "--classes", "2", "--steps", "12", "--out", str(data)]) == 0
        assert main(["train", "--data", str(data), "--hidden", "8",
                     "--classes", "2", "--updates", "4", "--out", str(metrics)]) == 0
        lines = metrics.read_text().strip().splitlines()
        assert lines[0] == "epoch,step,loss,accuracy"
        assert len(lines) == 5

    def test_train_with_pooling(self, tmp_path, capsys):
        data = tmp_path / "ds.spikes"
        assert main(["gen-data", "--samples", "2", "--channels", "10",
                     "--classes", "2", "--steps", "8", "--out", str(data)]) == 0
        assert main(["train", "--data", str(data), "--pool", "2",
                     "--hidden", "6", "--classes", "2", "--updates", "2"]) == 0


class TestBenchCommand:
    def test_time_mode_csv(self, tmp_path, capsys):
        out = tmp_path / "bench.csv"
        code = main(["bench", "--hidden", "8", "--steps", "10", "--inputs", "6",
                     "--repeats", "3", "--precision", "f64", "--out", str(out)])
        assert code == 0
        with open(out) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["method", "n_hidden", "timesteps", "mean_step_ms",
                           "std_step_ms", "peak_bytes", "seed"]
        assert len(rows) == 2


class TestConfigFile:
    def test_overrides_flags(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("hidden=4\nsteps=6\n")
        out = tmp_path / "gc.csv"
        assert main(["gradcheck", "--hidden", "64", "--inputs", "8",
                     "--classes", "2", "--config", str(cfg),
                     "--out", str(out)]) == 0
        with open(out) as fh:
            rows = list(csv.reader(fh))
        assert rows[1][2] == "4" and rows[1][3] == "6"

    def test_unknown_key(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("warp_speed=9\n")
        assert main(["gradcheck", "--config", str(cfg)]) == 1
