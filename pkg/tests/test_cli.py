import csv
import json

import pytest

from fuzzykan.cli import EXIT_DATA, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, main


def run_cli(argv):
    return main(argv)


def train_args(data_dir, out_dir, **overrides):
    flags = {
        "dataset": "mnist",
        "pooling": "fuzzy",
        "head": "kan",
        "epochs": 1,
        "batch": 16,
        "train-limit": 32,
        "data-dir": str(data_dir),
        "out-dir": str(out_dir),
    }
    flags.update(overrides)
    argv = ["train"]
    for key, value in flags.items():
        argv += [f"--{key}", str(value)]
    return argv


class TestTrainCommand:
    def test_writes_artifacts(self, synthetic_idx_dir, tmp_path, capsys):
        out = tmp_path / "run"
        assert run_cli(train_args(synthetic_idx_dir, out)) == EXIT_OK
        for name in ("metrics.csv", "confusion_matrix.csv", "model.fkan", "config.json"):
            assert (out / name).exists(), name
        captured = capsys.readouterr()
        assert "final: accuracy" in captured.out
        with open(out / "metrics.csv") as f:
            rows = list(csv.reader(f))
        assert rows[0][0] == "epoch" and len(rows) == 2

    def test_zero_epochs_valid(self, synthetic_idx_dir, tmp_path):
        out = tmp_path / "run"
        assert run_cli(train_args(synthetic_idx_dir, out, epochs=0)) == EXIT_OK
        with open(out / "metrics.csv") as f:
            assert len(list(csv.reader(f))) == 1  # header only

    def test_missing_data_exit_2(self, tmp_path, capsys, monkeypatch):
        monkeypatch.delenv("FUZZY_KAN_DATA", raising=False)
        empty = tmp_path / "nodata"
        empty.mkdir()
        assert run_cli(train_args(empty, tmp_path / "run")) == EXIT_DATA
        assert "data error" in capsys.readouterr().err

    def test_no_data_dir_exit_2(self, tmp_path, capsys, monkeypatch):
        monkeypatch.delenv("FUZZY_KAN_DATA", raising=False)
        argv = ["train", "--dataset", "mnist", "--epochs", "0", "--out-dir", str(tmp_path)]
        assert run_cli(argv) == EXIT_DATA
        assert "FUZZY_KAN_DATA" in capsys.readouterr().err

    def test_env_var_fallback(self, synthetic_idx_dir, tmp_path, monkeypatch):
        monkeypatch.setenv("FUZZY_KAN_DATA", str(synthetic_idx_dir))
        argv = ["train", "--dataset", "mnist", "--epochs", "0", "--out-dir", str(tmp_path / "run")]
        assert run_cli(argv) == EXIT_OK

    def test_config_round_trip_reproduces(self, synthetic_idx_dir, tmp_path):
        first = tmp_path / "first"
        assert run_cli(train_args(synthetic_idx_dir, first, **{"pooling": "max", "head": "mlp"})) == EXIT_OK
        saved = json.loads((first / "config.json").read_text())
        assert saved["pooling"] == "max" and saved["head"] == "mlp"

        second = tmp_path / "second"
        argv = ["train", "--config", str(first / "config.json"), "--out-dir", str(second)]
        assert run_cli(argv) == EXIT_OK
        assert (first / "metrics.csv").read_text().splitlines()[1].rsplit(",", 1)[0] == (
            second / "metrics.csv"
        ).read_text().splitlines()[1].rsplit(",", 1)[0]  # identical apart from seconds

    def test_usage_error_exit_1(self):
        with pytest.raises(SystemExit) as exc:
            run_cli(["train", "--pooling", "median"])
        assert exc.value.code == EXIT_USAGE

    def test_unknown_command_exit_1(self):
        with pytest.raises(SystemExit) as exc:
            run_cli(["serve"])
        assert exc.value.code == EXIT_USAGE


class TestMatrixCommand:
    def test_six_rows_in_order(self, synthetic_idx_dir, tmp_path):
        out = tmp_path / "matrix"
        argv = [
            "matrix",
            "--dataset", "mnist",
            "--epochs", "0",
            "--train-limit", "16",
            "--data-dir", str(synthetic_idx_dir),
            "--out-dir", str(out),
        ]
        assert run_cli(argv) == EXIT_OK
        with open(out / "comparison.csv") as f:
            rows = list(csv.reader(f))
        assert rows[0] == ["head", "pooling", "accuracy", "precision", "recall", "f1"]
        assert [(r[0], r[1]) for r in rows[1:]] == [
            ("MLP", "avg"),
            ("MLP", "max"),
            ("MLP", "fuzzy"),
            ("KAN", "avg"),
            ("KAN", "max"),
            ("KAN", "fuzzy"),
        ]
        for head, pooling in (("mlp", "avg"), ("kan", "fuzzy")):
            assert (out / f"{head}_{pooling}" / "metrics.csv").exists()


class TestCheckCommand:
    @pytest.mark.parametrize("kind", ["pool-oracle", "spline", "grad"])
    def test_pass(self, kind, capsys):
        assert run_cli(["check", kind]) == EXIT_OK
        assert "PASS" in capsys.readouterr().out

    def test_bad_kind(self):
        with pytest.raises(SystemExit) as exc:
            run_cli(["check", "entropy"])
        assert exc.value.code == EXIT_USAGE
