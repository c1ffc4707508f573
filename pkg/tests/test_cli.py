import hashlib

from click.testing import CliRunner

from travseg.cli import main


def test_replay_bundled_episode(tmp_path, bundled_episode_dir):
    runner = CliRunner()
    log = tmp_path / "episode.jsonl"
    result = runner.invoke(
        main,
        [
            "replay",
            "--episode", str(bundled_episode_dir),
            "--config", str(bundled_episode_dir / "config.yaml"),
            "--log", str(log),
        ],
    )
    assert result.exit_code == 0, result.output
    assert log.exists()
    assert len(log.read_text().strip().splitlines()) == 24
    assert "2 scene calls" in result.output


def test_replay_twice_is_hash_identical(tmp_path, bundled_episode_dir):
    runner = CliRunner()
    digests = []
    for name in ("a.jsonl", "b.jsonl"):
        log = tmp_path / name
        result = runner.invoke(
            main,
            [
                "replay",
                "--episode", str(bundled_episode_dir),
                "--config", str(bundled_episode_dir / "config.yaml"),
                "--log", str(log),
            ],
        )
        assert result.exit_code == 0, result.output
        digests.append(hashlib.sha256(log.read_bytes()).hexdigest())
    assert digests[0] == digests[1]


def test_replay_missing_episode_dir_names_path(tmp_path):
    runner = CliRunner()
    missing = tmp_path / "nowhere"
    result = runner.invoke(
        main,
        ["replay", "--episode", str(missing), "--config", "x.yaml", "--log", "y"],
    )
    assert result.exit_code == 2
    assert str(missing) in result.output


def test_replay_interactive_refused_with_guidance(tmp_path, bundled_episode_dir):
    runner = CliRunner()
    result = runner.invoke(
        main,
        [
            "replay",
            "--episode", str(bundled_episode_dir),
            "--config", str(bundled_episode_dir / "config.yaml"),
            "--operator", "interactive",
            "--log", str(tmp_path / "log.jsonl"),
        ],
    )
    assert result.exit_code == 2
    assert "serve" in result.output


def test_eval_cli_on_demo(tmp_path, bundled_episode_dir):
    runner = CliRunner()
    result = runner.invoke(
        main,
        [
            "eval",
            "--episode", str(bundled_episode_dir),
            "--config", str(bundled_episode_dir / "config.yaml"),
            "--mapping", str(bundled_episode_dir / "mapping.yaml"),
            "--out", str(tmp_path / "out"),
        ],
    )
    assert result.exit_code == 0, result.output
    assert "miou=1.0000" in result.output
    assert (tmp_path / "out" / "eval_report.json").exists()


def test_eval_malformed_mapping_names_entry(tmp_path, bundled_episode_dir):
    bad = tmp_path / "mapping.yaml"
    bad.write_text("dataset: x\nformat: id\nclasses:\n  - {id: 0, name: a, role: bogus}\n")
    runner = CliRunner()
    result = runner.invoke(
        main,
        [
            "eval",
            "--episode", str(bundled_episode_dir),
            "--config", str(bundled_episode_dir / "config.yaml"),
            "--mapping", str(bad),
            "--out", str(tmp_path / "out"),
        ],
    )
    assert result.exit_code == 2
    assert "classes[0]" in result.output


def test_sweep_cli(tmp_path, bundled_episode_dir):
    runner = CliRunner()
    result = runner.invoke(
        main,
        [
            "sweep",
            "--episode", str(bundled_episode_dir),
            "--config", str(bundled_episode_dir / "config.yaml"),
            "--thresholds", "0.85,0.9,0.925,0.95",
            "--out", str(tmp_path / "out"),
        ],
    )
    assert result.exit_code == 0, result.output
    csv_lines = (tmp_path / "out" / "hoc_sweep.csv").read_text().strip().splitlines()
    assert len(csv_lines) == 1 + 4 * 24  # header + 4 thresholds x 24 frames


def test_sweep_bad_thresholds(tmp_path, bundled_episode_dir):
    runner = CliRunner()
    result = runner.invoke(
        main,
        [
            "sweep",
            "--episode", str(bundled_episode_dir),
            "--config", str(bundled_episode_dir / "config.yaml"),
            "--thresholds", "0.9,banana",
            "--out", str(tmp_path / "out"),
        ],
    )
    assert result.exit_code == 2


def test_make_demo(tmp_path):
    runner = CliRunner()
    result = runner.invoke(main, ["make-demo", "--out", str(tmp_path / "demo")])
    assert result.exit_code == 0, result.output
    assert (tmp_path / "demo" / "manifest.json").exists()
    assert (tmp_path / "demo" / "config.yaml").exists()
