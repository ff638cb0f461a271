import json
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from catstyle.cli import main


@pytest.fixture(scope="module")
def runner():
    return CliRunner()


def blocks_config(tmp_path: Path, **overrides) -> Path:
    base = dict(
        dataset_name="synthetic_blocks",
        num_clusters=2,
        style_dim=4,
        batch_size=8,
        n_critic=2,
        total_encoder_steps=2,
        eval_every=2,
        seed=1,
    )
    base.update(overrides)
    path = tmp_path / "blocks.json"
    path.write_text(json.dumps(base))
    return path


@pytest.fixture(scope="module")
def trained_run(runner, tmp_path_factory):
    """One tiny trained checkpoint shared by the read-only CLI tests."""
    root = tmp_path_factory.mktemp("cli_run")
    cfg = blocks_config(root)
    out = root / "out"
    result = runner.invoke(main, ["train", "--config", str(cfg), "--out-dir", str(out)])
    assert result.exit_code == 0, result.output
    return {"config": cfg, "out": out, "checkpoint": out / "checkpoint.pt", "root": root}


class TestTrainCommand:
    def test_writes_checkpoint_log_and_report(self, trained_run):
        assert trained_run["checkpoint"].exists()
        assert (trained_run["out"] / "metrics.jsonl").exists()
        assert (trained_run["out"] / "metrics.json").exists()

    def test_prints_final_metrics(self, runner, trained_run, tmp_path):
        out = tmp_path / "again"
        result = runner.invoke(
            main, ["train", "--config", str(trained_run["config"]), "--out-dir", str(out)]
        )
        assert result.exit_code == 0
        assert "acc=" in result.output
        assert "config hash" in result.output

    def test_missing_config_is_usage_error(self, runner):
        result = runner.invoke(main, ["train"])
        assert result.exit_code == 2

    def test_strict_deterministic_runs_reproduce_logs(self, runner, tmp_path):
        cfg = blocks_config(tmp_path, seed=7)
        logs = []
        for name in ("a", "b"):
            out = tmp_path / name
            result = runner.invoke(
                main,
                ["train", "--config", str(cfg), "--out-dir", str(out),
                 "--seed", "7", "--strict-deterministic"],
            )
            assert result.exit_code == 0, result.output
            logs.append((out / "metrics.jsonl").read_text())
        assert logs[0] == logs[1]


class TestEvalCommand:
    def test_matches_metrics_recorded_at_save_time(self, runner, trained_run, tmp_path):
        out = tmp_path / "eval_out"
        result = runner.invoke(
            main, ["eval", "--checkpoint", str(trained_run["checkpoint"]), "--out-dir", str(out)]
        )
        assert result.exit_code == 0, result.output
        saved = json.loads((trained_run["out"] / "metrics.json").read_text())
        fresh = json.loads((out / "metrics.json").read_text())
        assert fresh["argmax"] == saved["argmax"]

    def test_kmeans_flag_emits_four_rows(self, runner, trained_run):
        result = runner.invoke(
            main, ["eval", "--checkpoint", str(trained_run["checkpoint"]), "--kmeans"]
        )
        assert result.exit_code == 0, result.output
        for row in ("argmax", "kmeans_z", "kmeans_zc", "kmeans_zs"):
            assert row in result.output

    def test_architecture_mismatch_exits_3(self, runner, trained_run, tmp_path):
        other = blocks_config(tmp_path, num_clusters=3)
        result = runner.invoke(
            main,
            ["eval", "--checkpoint", str(trained_run["checkpoint"]), "--config", str(other)],
        )
        assert result.exit_code == 3
        assert "does not match" in result.output


class TestEmbedCommand:
    def test_dump_has_one_row_per_image_and_latent_columns(self, runner, trained_run, tmp_path):
        out = tmp_path / "embed_out"
        result = runner.invoke(
            main, ["embed", "--checkpoint", str(trained_run["checkpoint"]), "--out-dir", str(out)]
        )
        assert result.exit_code == 0, result.output
        lines = (out / "embeddings.csv").read_text().strip().splitlines()
        header = lines[0].split(",")
        # K=2 category + 4 style columns, then assignment/label/config_hash
        assert header[:6] == ["z_c_0", "z_c_1", "z_s_0", "z_s_1", "z_s_2", "z_s_3"]
        assert header[6:] == ["assignment", "label", "config_hash"]
        assert len(lines) - 1 == 2000

    def test_plot_file_produced_and_nonempty(self, runner, trained_run, tmp_path):
        out = tmp_path / "plot_out"
        result = runner.invoke(
            main,
            ["embed", "--checkpoint", str(trained_run["checkpoint"]), "--out-dir", str(out),
             "--plot", "--reducer", "pca", "--max-plot-points", "500"],
        )
        assert result.exit_code == 0, result.output
        plot = out / "embeddings.png"
        assert plot.exists()
        assert plot.stat().st_size > 0
