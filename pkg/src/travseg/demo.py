"""Generator for the bundled synthetic demo episode.

The 24-frame episode walks through every engine event:

    frames 0-7    meadow scene, high grass attention        NO_CALL
    frame  8      forest scene appears                      HOC_SCENE_CHANGE
    frames 9-11   forest, ROI well explained                NO_CALL
    frame  12     unexplained block enters the ROI          HOC_UNKNOWN_OBJECT
    frames 13-15  block explained by the operator's prompt  NO_CALL
    frame  16     back to meadow, but history only holds
                  forest entries                            HOC_SCENE_CHANGE
    frames 17-19  meadow                                    NO_CALL
    frame  20     forest again; history resolves it         HISTORY_UPDATE
    frames 21-23  forest                                    NO_CALL

Attention maps are analytic (piecewise-constant fields), so the event frames
above are exact. Ground-truth annotations are produced by replaying the
episode through the engine itself, which makes the bundled eval demo score
MIoU 1.0 by construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .config import dump_config
from .engine import Engine, ScriptedOperator
from .memory import cosine_similarity
from .providers.replay import EpisodeWriter, ReplayEpisode
from .providers.synthetic import unit_embedding
from .types import EngineConfig, Frame, RoiSpec, TraversalPrefs

WIDTH, HEIGHT = 64, 48
EMBED_DIM = 8
SEED = 7

MEADOW = range(0, 8)
FOREST_A = range(8, 16)
MEADOW_B = range(16, 20)
FOREST_B = range(20, 24)
GAP_FRAMES = (12, 13, 14)
GAP_ROWS = slice(30, 40)
GAP_COLS = slice(24, 40)

SCENE_CHANGE_FRAMES = (8, 16)
UNKNOWN_OBJECT_FRAME = 12
HISTORY_UPDATE_FRAME = 20

PROMPTS = ("grass", "bush", "mud", "rock")


def _scene(frame_id: int) -> str:
    return "meadow" if frame_id in MEADOW or frame_id in MEADOW_B else "forest"


def _mask(frame_id: int, prompt: str) -> np.ndarray:
    m = np.full((HEIGHT, WIDTH), 0.05)
    scene = _scene(frame_id)
    if prompt == "grass":
        if scene == "meadow":
            m[:] = 0.9
            m[: HEIGHT // 3, :] = 0.2
        else:
            m[HEIGHT // 2 :, :] = 0.8
            m[: HEIGHT // 2, :] = 0.3
    elif prompt == "bush":
        m[:] = 0.1
        if scene == "forest":
            m[: HEIGHT // 2, :] = 0.9
    elif prompt == "mud":
        m[:] = 0.1
    elif prompt == "rock":
        if frame_id in GAP_FRAMES:
            m[GAP_ROWS, GAP_COLS] = 0.9
    if frame_id in GAP_FRAMES and prompt != "rock":
        m[GAP_ROWS, GAP_COLS] = 0.05
    return m


def _image(frame_id: int) -> np.ndarray:
    px = np.zeros((HEIGHT, WIDTH, 3), dtype=np.uint8)
    if _scene(frame_id) == "meadow":
        px[: HEIGHT // 3] = (120, 180, 235)
        px[HEIGHT // 3 :] = (90, 170, 70)
    else:
        px[: HEIGHT // 2] = (30, 80, 35)
        px[HEIGHT // 2 :] = (105, 125, 60)
    if frame_id in GAP_FRAMES:
        px[GAP_ROWS, GAP_COLS] = (128, 128, 128)
    return px


def demo_config() -> EngineConfig:
    return EngineConfig(
        theta_scene=0.9,
        theta_roi=0.3,
        theta_trav=0.0,
        hoc_timeout=20.0,
        roi=RoiSpec(
            name="rover",
            polygon=((0.25, 0.55), (0.75, 0.55), (0.75, 0.95), (0.25, 0.95)),
        ),
        initial_prefs=TraversalPrefs.from_pairs([("grass", 1.0), ("bush", -1.0)]),
    )


def demo_operator_script() -> dict:
    return {
        "default": [],
        "responses": [
            {"frame": 8, "prefs": [["mud", -0.5]]},
            {"frame": 12, "prefs": [["rock", -1.0]]},
        ],
    }


def demo_operator() -> ScriptedOperator:
    return ScriptedOperator(
        responses=[
            (8, TraversalPrefs.from_pairs([("mud", -0.5)])),
            (12, TraversalPrefs.from_pairs([("rock", -1.0)])),
        ],
        default=TraversalPrefs(),
    )


@dataclass(frozen=True)
class DemoBuild:
    directory: Path
    config_path: Path
    operator_path: Path
    mapping_path: Path
    frame_count: int


def build_demo_episode(directory: str | Path) -> DemoBuild:
    """Write the demo episode, its config, operator script, and gt annotations."""
    directory = Path(directory)
    writer = EpisodeWriter(directory, WIDTH, HEIGHT, EMBED_DIM)
    embeddings = {label: unit_embedding(SEED, label, EMBED_DIM) for label in ("meadow", "forest")}
    # The narrative needs the two scenes to read as different and a revisit
    # to read as identical; keyed unit vectors give the former with margin.
    assert cosine_similarity(embeddings["meadow"], embeddings["forest"]) < 0.8

    for frame_id in range(24):
        frame = Frame(id=frame_id, pixels=_image(frame_id), timestamp=frame_id / 10.0)
        writer.add_frame(
            frame,
            embeddings[_scene(frame_id)].values,
            {prompt: _mask(frame_id, prompt) for prompt in PROMPTS},
            timestamp=frame_id / 10.0,
        )
    writer.finalize()

    config = demo_config()
    config_path = directory / "config.yaml"
    dump_config(config, config_path)

    operator_path = directory / "operator.yaml"
    with open(operator_path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(demo_operator_script(), fh, sort_keys=False, default_flow_style=None)

    mapping_path = directory / "mapping.yaml"
    with open(mapping_path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(
            {
                "dataset": "synthetic-demo",
                "format": "id",
                "classes": [
                    {"id": 0, "name": "blocked", "role": "non_traversable"},
                    {"id": 1, "name": "open", "role": "traversable"},
                ],
            },
            fh,
            sort_keys=False,
        )

    _write_ground_truth(directory, config)
    return DemoBuild(
        directory=directory,
        config_path=config_path,
        operator_path=operator_path,
        mapping_path=mapping_path,
        frame_count=24,
    )


def _write_ground_truth(directory: Path, config: EngineConfig) -> None:
    """Replay the fresh episode and store its own binarized output as gt."""
    from PIL import Image

    episode = ReplayEpisode(directory)
    engine = Engine(
        config,
        episode.mask_provider(),
        episode.embedding_provider(),
        operator=demo_operator(),
    )
    (directory / "gt").mkdir(exist_ok=True)
    first = True
    for frame in episode.iter_frames():
        if first:
            engine.init_episode(frame)
            first = False
        outcome = engine.step(frame)
        rel = f"gt/{frame.id:06d}.png"
        Image.fromarray(outcome.binary.values).save(directory / rel)
        episode.record(frame.id)["annotation"] = rel
    import json

    manifest_path = directory / "manifest.json"
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(episode.manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")
