"""Episode-level evaluation and operator-call frequency sweeps."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

from ..engine import Engine, Operator
from ..errors import ConfigError
from ..providers.replay import ReplayEpisode
from ..types import EngineConfig
from .labels import LabelMapping, load_annotation
from .metrics import ConfusionAccumulator, EvalReport

SWEEP_CSV_HEADER = [
    "threshold",
    "frame_id",
    "scene_calls_cum",
    "roi_calls_cum",
    "history_updates_cum",
]


def run_episode_eval(
    episode: ReplayEpisode,
    config: EngineConfig,
    mapping: LabelMapping,
    operator: Operator,
    dataset: str | None = None,
    log_path: str | Path | None = None,
    mask_provider=None,
    embedding_provider=None,
) -> EvalReport:
    """Run the engine over a replay episode, scoring each binarized frame.

    Frames and ground truth come from the episode directory; masks and
    embeddings default to the recorded ones but can be overridden (e.g. with
    a remote provider backed by live models). IoU counts are accumulated over
    pixels of the whole episode (not averaged per frame), so long frames
    weigh proportionally more.
    """
    engine = Engine(
        config,
        mask_provider if mask_provider is not None else episode.mask_provider(),
        embedding_provider if embedding_provider is not None else episode.embedding_provider(),
        operator=operator,
        log_path=log_path,
    )
    acc = ConfusionAccumulator()
    first = True
    try:
        for frame in episode.iter_frames():
            if first:
                engine.init_episode(frame)
                first = False
            outcome = engine.step(frame)
            gt_path = episode.annotation_path(frame.id)
            if gt_path is None:
                raise ConfigError(f"episode frame {frame.id} has no annotation for eval")
            gt, ignore = load_annotation(gt_path, mapping, frame.width, frame.height)
            acc.add(outcome.binary, gt, ignore)
    finally:
        engine.close()
    result = acc.result()
    return EvalReport(
        dataset=dataset or mapping.dataset,
        miou=result.miou,
        iou_traversable=result.iou_traversable,
        iou_non_traversable=result.iou_non_traversable,
        frame_count=acc.frames,
        config_snapshot={
            "theta_scene": config.theta_scene,
            "theta_roi": config.theta_roi,
            "theta_trav": config.theta_trav,
            "roi": config.roi.name,
            "prefs": config.initial_prefs.as_pairs(),
        },
    )


def write_report(report: EvalReport, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.as_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


@dataclass(frozen=True)
class SweepRow:
    frame_id: int
    scene_calls_cum: int
    roi_calls_cum: int
    history_updates_cum: int


@dataclass(frozen=True)
class HocSweepResult:
    """Cumulative operator-call counts per frame for one similarity threshold."""

    threshold: float
    rows: tuple[SweepRow, ...]

    @property
    def total_scene_calls(self) -> int:
        return self.rows[-1].scene_calls_cum if self.rows else 0

    @property
    def total_roi_calls(self) -> int:
        return self.rows[-1].roi_calls_cum if self.rows else 0

    @property
    def total_history_updates(self) -> int:
        return self.rows[-1].history_updates_cum if self.rows else 0


def run_hoc_sweep(
    episode: ReplayEpisode,
    config: EngineConfig,
    thresholds: Sequence[float],
    operator_factory: Callable[[], Operator],
    out_path: str | Path | None = None,
) -> list[HocSweepResult]:
    """One full engine run per scene-similarity threshold.

    The operator factory provides a fresh (typically scripted) operator per
    run so consumed responses do not leak between thresholds.
    """
    results = []
    for threshold in thresholds:
        run_config = EngineConfig(
            theta_scene=float(threshold),
            theta_roi=config.theta_roi,
            theta_trav=config.theta_trav,
            hoc_timeout=config.hoc_timeout,
            persist_history=config.persist_history,
            roi=config.roi,
            initial_prefs=config.initial_prefs,
        )
        engine = Engine(
            run_config,
            episode.mask_provider(),
            episode.embedding_provider(),
            operator=operator_factory(),
        )
        rows: list[SweepRow] = []
        first = True
        for frame in episode.iter_frames():
            if first:
                engine.init_episode(frame)
                first = False
            engine.step(frame)
            rows.append(
                SweepRow(
                    frame_id=frame.id,
                    scene_calls_cum=engine.scene_calls,
                    roi_calls_cum=engine.roi_calls,
                    history_updates_cum=engine.history_updates,
                )
            )
        results.append(HocSweepResult(threshold=float(threshold), rows=tuple(rows)))
    if out_path is not None:
        write_sweep_csv(results, out_path)
    return results


def write_sweep_csv(results: Sequence[HocSweepResult], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_CSV_HEADER)
        for result in results:
            for row in result.rows:
                writer.writerow(
                    [
                        result.threshold,
                        row.frame_id,
                        row.scene_calls_cum,
                        row.roi_calls_cum,
                        row.history_updates_cum,
                    ]
                )
