"""Command-line entry points: replay, eval, sweep, serve, make-demo."""

from __future__ import annotations

import sys
from pathlib import Path

import click

from .config import load_config, load_prefs_file
from .dataeval.labels import load_mapping
from .dataeval.runner import run_episode_eval, run_hoc_sweep, write_report
from .demo import build_demo_episode
from .engine import Engine, Operator, ScriptedOperator
from .errors import TravsegError
from .providers.replay import ReplayEpisode
from .types import EngineConfig

DEFAULT_SWEEP_THRESHOLDS = (0.85, 0.9, 0.925, 0.95)


def _fail(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(2)


def _load_episode(episode_dir: str) -> ReplayEpisode:
    path = Path(episode_dir)
    if not path.is_dir():
        _fail(f"episode directory not found: {path}")
    try:
        return ReplayEpisode(path)
    except TravsegError as exc:
        _fail(str(exc))
    raise AssertionError("unreachable")


def _load_engine_config(config_path: str) -> EngineConfig:
    try:
        return load_config(config_path)
    except TravsegError as exc:
        _fail(str(exc))
    raise AssertionError("unreachable")


def _make_operator(spec: str) -> Operator:
    if spec.startswith("scripted:"):
        path = spec.split(":", 1)[1]
        if not Path(path).is_file():
            _fail(f"operator script not found: {path}")
        try:
            return ScriptedOperator.from_file(path)
        except TravsegError as exc:
            _fail(f"operator script {path}: {exc}")
    if spec == "interactive":
        _fail(
            "interactive operator needs the live service; run "
            "`travseg serve --episode-source DIR --config FILE` and use the console"
        )
    _fail(f"unknown operator spec {spec!r}; use scripted:FILE or interactive")
    raise AssertionError("unreachable")


@click.group()
@click.version_option()
def main() -> None:
    """Off-road traversability evaluation engine."""


@main.command("replay")
@click.option("--episode", "episode_dir", required=True, help="Replay episode directory.")
@click.option("--config", "config_path", required=True, help="Engine config YAML.")
@click.option("--operator", "operator_spec", default=None,
              help="scripted:FILE or interactive; defaults to the episode's operator.yaml.")
@click.option("--log", "log_path", required=True, help="Episode log output (JSONL).")
@click.option("--history", "history_path", default=None,
              help="Operator-call history artifact (JSONL); reloaded on the next "
                   "run when the config sets persist_history.")
def cmd_replay(episode_dir, config_path, operator_spec, log_path, history_path) -> None:
    """Run the engine over a recorded episode with a scripted operator."""
    episode = _load_episode(episode_dir)
    config = _load_engine_config(config_path)
    if operator_spec is None:
        bundled = Path(episode_dir) / "operator.yaml"
        operator = ScriptedOperator.from_file(bundled) if bundled.is_file() else ScriptedOperator()
    else:
        operator = _make_operator(operator_spec)
    engine = Engine(
        config,
        episode.mask_provider(),
        episode.embedding_provider(),
        operator=operator,
        log_path=log_path,
        history_path=history_path,
    )
    try:
        first = True
        for frame in episode.iter_frames():
            if first:
                engine.init_episode(frame)
                first = False
            outcome = engine.step(frame)
            if outcome.event.value != "NO_CALL":
                click.echo(f"frame {frame.id}: {outcome.event.value}")
    except TravsegError as exc:
        _fail(str(exc))
    finally:
        engine.close()
    click.echo(
        f"done: {engine.frame_count} frames, {engine.scene_calls} scene calls, "
        f"{engine.roi_calls} roi calls, {engine.history_updates} history updates"
    )


@main.command("eval")
@click.option("--episode", "episode_dir", required=True, help="Replay episode with gt annotations.")
@click.option("--config", "config_path", required=True)
@click.option("--mapping", "mapping_path", required=True, help="Label mapping YAML.")
@click.option("--prompts", "prompts_path", default=None, help="Override initial prompt/weight list.")
@click.option("--dataset", default=None, help="Dataset name for the report.")
@click.option("--operator", "operator_spec", default=None, help="scripted:FILE; defaults to episode's script.")
@click.option("--provider", "provider_spec_text", default=None,
              help="Mask/embedding source override: remote:URL or synthetic:seed=N "
                   "(default: the episode's recorded maps).")
@click.option("--out", "out_dir", required=True, help="Output directory for the report.")
def cmd_eval(episode_dir, config_path, mapping_path, prompts_path, dataset, operator_spec,
             provider_spec_text, out_dir):
    """Score binarized predictions against ground truth (MIoU)."""
    episode = _load_episode(episode_dir)
    config = _load_engine_config(config_path)
    mask_provider = embedding_provider = None
    if provider_spec_text is not None:
        from .providers import build_providers, parse_provider_spec

        try:
            mask_provider, embedding_provider = build_providers(
                parse_provider_spec(provider_spec_text)
            )
        except TravsegError as exc:
            _fail(str(exc))
            return
    try:
        mapping = load_mapping(mapping_path)
    except TravsegError as exc:
        _fail(str(exc))
        return
    if prompts_path:
        try:
            prefs = load_prefs_file(prompts_path)
        except TravsegError as exc:
            _fail(str(exc))
            return
        config = EngineConfig(
            theta_scene=config.theta_scene,
            theta_roi=config.theta_roi,
            theta_trav=config.theta_trav,
            hoc_timeout=config.hoc_timeout,
            persist_history=config.persist_history,
            roi=config.roi,
            initial_prefs=prefs,
        )
    if operator_spec is None:
        bundled = Path(episode_dir) / "operator.yaml"
        operator = ScriptedOperator.from_file(bundled) if bundled.is_file() else ScriptedOperator()
    else:
        operator = _make_operator(operator_spec)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        report = run_episode_eval(
            episode,
            config,
            mapping,
            operator,
            dataset=dataset,
            mask_provider=mask_provider,
            embedding_provider=embedding_provider,
        )
    except TravsegError as exc:
        _fail(str(exc))
        return
    write_report(report, out / "eval_report.json")
    click.echo(
        f"miou={report.miou:.4f} trav={report.iou_traversable:.4f} "
        f"non_trav={report.iou_non_traversable:.4f} frames={report.frame_count}"
    )
    click.echo(f"report written to {out / 'eval_report.json'}")


@main.command("sweep")
@click.option("--episode", "episode_dir", required=True)
@click.option("--config", "config_path", required=True)
@click.option("--thresholds", "thresholds_csv", default=None,
              help="Comma-separated scene-similarity thresholds.")
@click.option("--operator", "operator_spec", default=None, help="scripted:FILE per run.")
@click.option("--out", "out_dir", required=True)
def cmd_sweep(episode_dir, config_path, thresholds_csv, operator_spec, out_dir):
    """Cumulative operator-call counts per frame across similarity thresholds."""
    episode = _load_episode(episode_dir)
    config = _load_engine_config(config_path)
    if thresholds_csv:
        try:
            thresholds = [float(v) for v in thresholds_csv.split(",") if v.strip()]
        except ValueError:
            _fail(f"bad --thresholds list: {thresholds_csv!r}")
            return
    else:
        thresholds = list(DEFAULT_SWEEP_THRESHOLDS)

    script_path = None
    if operator_spec is not None:
        if not operator_spec.startswith("scripted:"):
            _fail("sweep needs a scripted operator (scripted:FILE)")
        script_path = operator_spec.split(":", 1)[1]
    else:
        bundled = Path(episode_dir) / "operator.yaml"
        script_path = str(bundled) if bundled.is_file() else None

    def operator_factory() -> Operator:
        if script_path is None:
            return ScriptedOperator()
        return ScriptedOperator.from_file(script_path)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "hoc_sweep.csv"
    try:
        results = run_hoc_sweep(episode, config, thresholds, operator_factory, out_path=csv_path)
    except TravsegError as exc:
        _fail(str(exc))
        return
    for result in results:
        click.echo(
            f"theta={result.threshold}: scene={result.total_scene_calls} "
            f"roi={result.total_roi_calls} history={result.total_history_updates}"
        )
    click.echo(f"sweep written to {csv_path}")


@main.command("serve")
@click.option("--port", default=8080, show_default=True, envvar="TRAVSEG_PORT",
              help="HTTP port (env TRAVSEG_PORT overrides).")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--episode-source", "episode_dir", required=True, help="Replay episode directory.")
@click.option("--config", "config_path", required=True)
@click.option("--console", "console_dir", default=None,
              help="Static console bundle directory (defaults to bundled frontend/dist).")
@click.option("--fps", default=4.0, show_default=True,
              help="Frame pacing; 0 runs unpaced.")
@click.option("--operator", "operator_spec", default="interactive", show_default=True,
              help="interactive (resolve via REST) or scripted:FILE.")
def cmd_serve(port, host, episode_dir, config_path, console_dir, fps, operator_spec):
    """Serve the live engine: REST + WebSocket events + operator console."""
    import uvicorn

    from .service import build_service

    episode = _load_episode(episode_dir)
    config = _load_engine_config(config_path)
    operator = None
    if operator_spec != "interactive":
        operator = _make_operator(operator_spec)
    app = build_service(
        episode, config, console_dir=console_dir, fps=fps, operator=operator
    )
    try:
        uvicorn.run(app, host=host, port=port, log_level="warning")
    except SystemExit:
        raise
    except OSError as exc:
        _fail(f"cannot bind {host}:{port}: {exc}")


@main.command("make-demo")
@click.option("--out", "out_dir", required=True, help="Directory for the generated episode.")
def cmd_make_demo(out_dir: str) -> None:
    """Generate the bundled synthetic demo episode."""
    build = build_demo_episode(out_dir)
    click.echo(f"demo episode with {build.frame_count} frames at {build.directory}")
    click.echo(f"config: {build.config_path}")
    click.echo(f"operator script: {build.operator_path}")


if __name__ == "__main__":
    main()
