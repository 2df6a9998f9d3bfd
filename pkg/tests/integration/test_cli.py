"""Integration tests for the command-line interface."""

import json

import numpy as np
import pytest
from click.testing import CliRunner

from src.cli import cli
from src.errors import TrainingError
from src.mtl import losses
from src.training import runs

pytestmark = pytest.mark.integration


@pytest.fixture
def runner():
    """Click test runner."""
    return CliRunner()


def only_run_dir(out_dir):
    dirs = [p for p in out_dir.iterdir() if p.is_dir()]
    assert len(dirs) == 1
    return dirs[0]


def snapshot_outputs(run_dir):
    return {
        str(path.relative_to(run_dir)): path.read_bytes()
        for path in sorted(run_dir.rglob("*"))
        if path.is_file() and path.name != "timings.json"
    }


class TestTrainCommand:
    """Test suite for `train`."""

    def test_full_experiment(self, runner, synthetic_config, tmp_path):
        """Test four variants over three seeds: 12 runs and 3 reports."""
        result = runner.invoke(cli, ["train", str(synthetic_config())])
        assert result.exit_code == 0, result.output
        assert "Experiment Complete" in result.output

        run_dir = only_run_dir(tmp_path / "outputs")
        histories = sorted(run_dir.glob("*/*/history.json"))
        assert len(histories) == 12
        assert sorted(p.name for p in (run_dir / "reports").glob("nt_*.json")) == [
            "nt_AMTFL.json",
            "nt_MTL.json",
            "nt_UAMTFL.json",
        ]
        config = json.loads((run_dir / "config.json").read_text())
        assert run_dir.name == config["config_digest"][:12]

        report = json.loads((run_dir / "reports" / "nt_UAMTFL.json").read_text())
        assert report["config_digest"] == config["config_digest"]
        assert report["runs"] == 3
        assert len(report["delta"]) == 4
        assert 0 <= report["nt_count"] <= 4

        record = json.loads((run_dir / "UAMTFL" / "1" / "history.json").read_text())
        assert len(record["history"]["epoch_loss"]) == 2
        assert (run_dir / "UAMTFL" / "1" / "checkpoint.bin").exists()
        assert not (run_dir / "STL" / "1" / "checkpoint.bin").exists()

    def test_rerun_is_byte_identical(self, runner, synthetic_config, tmp_path):
        """Test that rerunning a config reproduces every artifact except timings."""
        path = synthetic_config(variants=["STL", "UAMTFL"])
        assert runner.invoke(cli, ["train", str(path), "--seeds", "0,1"]).exit_code == 0
        run_dir = only_run_dir(tmp_path / "outputs")
        first = snapshot_outputs(run_dir)
        assert runner.invoke(cli, ["train", str(path), "--seeds", "0,1"]).exit_code == 0
        assert snapshot_outputs(run_dir) == first
        assert (run_dir / "timings.json").exists()

    def test_overrides(self, runner, synthetic_config, tmp_path):
        """Test that --seeds, --epsilon and --out are honoured."""
        out = tmp_path / "elsewhere"
        result = runner.invoke(
            cli,
            [
                "train",
                str(synthetic_config(variants=["STL", "MTL"])),
                "--seeds",
                "7",
                "--epsilon",
                "0.5",
                "--out",
                str(out),
            ],
        )
        assert result.exit_code == 0, result.output
        run_dir = only_run_dir(out)
        report = json.loads((run_dir / "reports" / "nt_MTL.json").read_text())
        assert report["epsilon"] == 0.5
        assert (run_dir / "MTL" / "7" / "history.json").exists()

    def test_missing_csv_exits_2(self, runner, tmp_path):
        """Test that a config pointing at a missing file is a config error."""
        path = tmp_path / "expr.json"
        path.write_text(
            json.dumps(
                {"benchmark": "expression-csv", "data": {"features": "nope.csv", "targets": "nope.csv"}}
            )
        )
        result = runner.invoke(cli, ["train", str(path)])
        assert result.exit_code == 2
        assert "file not found" in result.output

    def test_bad_seed_list(self, runner, synthetic_config):
        """Test that a malformed --seeds value is a usage error."""
        result = runner.invoke(cli, ["train", str(synthetic_config()), "--seeds", "a,b"])
        assert result.exit_code == 2

    def test_failed_runs_exit_3(self, runner, synthetic_config, tmp_path, monkeypatch):
        """Test that a failing run set is recorded and exits 3."""

        def exploding(spec, data, cfg, seed, checkpoint_dir=None):
            raise TrainingError("non-finite loss", 0, 0)

        monkeypatch.setattr(runs, "train", exploding)
        result = runner.invoke(cli, ["train", str(synthetic_config(variants=["STL", "MTL"]))])
        assert result.exit_code == 3
        assert "Training failed" in result.output

        run_dir = only_run_dir(tmp_path / "outputs")
        record = json.loads((run_dir / "MTL" / "0" / "history.json").read_text())
        assert "non-finite loss" in record["error"]
        assert record["metrics"] is None


class TestReportCommand:
    """Test suite for `report`."""

    def test_report_writes_figures(self, runner, synthetic_config, tmp_path):
        """Test the summary output and figure CSVs."""
        assert runner.invoke(cli, ["train", str(synthetic_config())]).exit_code == 0
        run_dir = only_run_dir(tmp_path / "outputs")
        result = runner.invoke(cli, ["report", str(run_dir)])
        assert result.exit_code == 0, result.output
        assert "Negative-transfer cases" in result.output
        for name in ("figure1a", "figure1b", "figure2a", "figure2b"):
            assert (run_dir / "reports" / f"{name}.csv").exists()

    def test_gap_is_listed(self, runner, synthetic_config, tmp_path):
        """Test that a missing variant report is shown as a gap."""
        assert runner.invoke(cli, ["train", str(synthetic_config())]).exit_code == 0
        run_dir = only_run_dir(tmp_path / "outputs")
        (run_dir / "reports" / "nt_AMTFL.json").unlink()
        result = runner.invoke(cli, ["report", str(run_dir)])
        assert result.exit_code == 0
        assert "gaps" in result.output and "AMTFL" in result.output

    def test_empty_directory_exits_2(self, runner, tmp_path):
        """Test that a directory without reports is rejected."""
        result = runner.invoke(cli, ["report", str(tmp_path)])
        assert result.exit_code == 2
        assert "no reports found" in result.output

    def test_digest_mismatch_exits_2(self, runner, synthetic_config, tmp_path):
        """Test that reports from another configuration are refused."""
        assert runner.invoke(cli, ["train", str(synthetic_config())]).exit_code == 0
        run_dir = only_run_dir(tmp_path / "outputs")
        config_path = run_dir / "config.json"
        stored = json.loads(config_path.read_text())
        stored["config_digest"] = "0" * 64
        config_path.write_text(json.dumps(stored))
        result = runner.invoke(cli, ["report", str(run_dir)])
        assert result.exit_code == 2


class TestGradcheckCommand:
    """Test suite for `gradcheck`."""

    def test_all_pass(self, runner):
        """Test that the shipped gradients all pass."""
        result = runner.invoke(cli, ["gradcheck"])
        assert result.exit_code == 0, result.output
        assert "All gradients match" in result.output

    def test_planted_fault_exits_1(self, runner, monkeypatch):
        """Test that a wrong L1 subgradient is named and exits 1."""
        from src.autodiff.tensor import Tensor

        def flipped(W):
            sign = np.sign(W.data)
            return Tensor.from_op(np.abs(W.data).sum(), (W,), lambda g: (-g * sign,), "abs_sum")

        monkeypatch.setattr(losses, "l1_penalty", flipped)
        result = runner.invoke(cli, ["gradcheck"])
        assert result.exit_code == 1
        assert "❌ [losses] l1_penalty" in result.output


class TestValidateCommand:
    """Test suite for `validate`."""

    def test_valid(self, runner, synthetic_config):
        """Test that a valid config prints its digest."""
        result = runner.invoke(cli, ["validate", str(synthetic_config())])
        assert result.exit_code == 0
        assert "digest:" in result.output

    def test_invalid(self, runner, tmp_path):
        """Test that an invalid config exits 2."""
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"benchmark": "nope"}))
        result = runner.invoke(cli, ["validate", str(path)])
        assert result.exit_code == 2
        assert "Validation failed" in result.output
