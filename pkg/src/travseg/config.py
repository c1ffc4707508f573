"""Engine configuration files (YAML).

Schema (all thresholds are plain decimal numbers, prompts are strings):

    theta_scene: 0.9        # scene-change gate on embedding cosine, [-1, 1]
    theta_roi: 0.6          # unknown-object gate on mean ROI uncertainty, [0, 1]
    theta_trav: 0.0         # pooled-evidence binarization threshold, [-1, 1]
    hoc_timeout: 60.0       # seconds to wait for the operator
    persist_history: false  # reuse operator-call history across episodes
    roi:
      name: rover
      polygon:              # normalized (x, y), origin top-left, >= 3 vertices
        - [0.25, 0.55]
        - [0.75, 0.55]
        - [0.9, 1.0]
        - [0.1, 1.0]
    prefs:                  # initial prompt/weight list, weights in [-1, 1]
      - prompt: grass
        weight: 1.0
      - prompt: bush
        weight: -1.0
"""

from __future__ import annotations

from pathlib import Path

import yaml

from .errors import ConfigError
from .types import EngineConfig, RoiSpec, TraversalPrefs, validate_prefs


def _require(doc: dict, key: str, path: Path):
    if key not in doc:
        raise ConfigError(f"{path}: missing required key {key!r}")
    return doc[key]


def parse_prefs(raw, where: str = "prefs") -> TraversalPrefs:
    """Accept either a list of {prompt, weight} mappings or [prompt, weight] pairs."""
    pairs: list[tuple[str, float]] = []
    if raw is None:
        raw = []
    if isinstance(raw, dict):
        pairs = [(str(k), float(v)) for k, v in raw.items()]
    else:
        for i, item in enumerate(raw):
            if isinstance(item, dict):
                if "prompt" not in item or "weight" not in item:
                    raise ConfigError(f"{where}[{i}]: needs 'prompt' and 'weight'")
                pairs.append((str(item["prompt"]), float(item["weight"])))
            else:
                try:
                    prompt, weight = item
                except (TypeError, ValueError):
                    raise ConfigError(f"{where}[{i}]: expected a (prompt, weight) pair")
                pairs.append((str(prompt), float(weight)))
    return validate_prefs(pairs)


def parse_roi(raw, where: str = "roi") -> RoiSpec:
    if not isinstance(raw, dict) or "polygon" not in raw:
        raise ConfigError(f"{where}: needs a 'polygon' vertex list")
    try:
        polygon = tuple((float(x), float(y)) for x, y in raw["polygon"])
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: polygon must be a list of [x, y] pairs")
    return RoiSpec(name=str(raw.get("name", "roi")), polygon=polygon)


def load_config(path: str | Path) -> EngineConfig:
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}")
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    try:
        return EngineConfig(
            theta_scene=float(_require(doc, "theta_scene", path)),
            theta_roi=float(_require(doc, "theta_roi", path)),
            theta_trav=float(doc.get("theta_trav", 0.0)),
            hoc_timeout=float(doc.get("hoc_timeout", 60.0)),
            persist_history=bool(doc.get("persist_history", False)),
            roi=parse_roi(_require(doc, "roi", path)),
            initial_prefs=parse_prefs(_require(doc, "prefs", path)),
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}")


def dump_config(config: EngineConfig, path: str | Path) -> None:
    doc = {
        "theta_scene": config.theta_scene,
        "theta_roi": config.theta_roi,
        "theta_trav": config.theta_trav,
        "hoc_timeout": config.hoc_timeout,
        "persist_history": config.persist_history,
        "roi": {
            "name": config.roi.name,
            "polygon": [[x, y] for x, y in config.roi.polygon],
        },
        "prefs": [
            {"prompt": p, "weight": w} for p, w in config.initial_prefs.as_pairs()
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(doc, fh, sort_keys=False, default_flow_style=None)


def load_prefs_file(path: str | Path) -> TraversalPrefs:
    """Standalone prompt/weight list file; same entry syntax as config 'prefs'."""
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError(f"prefs file not found: {path}")
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}")
    if isinstance(doc, dict) and "prefs" in doc:
        doc = doc["prefs"]
    return parse_prefs(doc, where=str(path))
