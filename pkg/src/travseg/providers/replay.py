"""Replay episodes: record model outputs to disk, run the engine bit-reproducibly.

Episode directory layout (paths are manifest-relative):

    manifest.json            frame list plus dimensions and embedding size
    frames/000000.png        RGB frame image
    maps/000000__grass.f32   one raw float32 little-endian row-major map
                             per (frame, prompt), named by a prompt slug
    embeddings/000000.f32    raw float32 little-endian embedding vector
    gt/000000.png            optional ground-truth annotation raster
"""

from __future__ import annotations

import json
import re
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np
from PIL import Image

from ..errors import MalformedResponseError
from ..types import AttentionMap, Embedding, Frame
from .base import check_embedding_array, check_mask_array

MANIFEST_NAME = "manifest.json"


def prompt_slug(prompt: str) -> str:
    """Filesystem-safe rendering of a prompt: lowercased, non-alnum runs to '-'."""
    slug = re.sub(r"[^a-z0-9]+", "-", prompt.lower()).strip("-")
    return slug or "prompt"


class ReplayEpisode:
    """Reader for a recorded episode; doubles as a provider pair factory."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        manifest_path = self.directory / MANIFEST_NAME
        try:
            with open(manifest_path, "r", encoding="utf-8") as fh:
                self.manifest = json.load(fh)
        except FileNotFoundError:
            raise MalformedResponseError(f"no manifest at {manifest_path}")
        except json.JSONDecodeError as exc:
            raise MalformedResponseError(f"unreadable manifest {manifest_path}: {exc}")
        for key in ("width", "height", "embedding_dim", "frames"):
            if key not in self.manifest:
                raise MalformedResponseError(f"manifest missing key {key!r}")
        self.width = int(self.manifest["width"])
        self.height = int(self.manifest["height"])
        self.embedding_dim = int(self.manifest["embedding_dim"])
        self._records = {int(rec["id"]): rec for rec in self.manifest["frames"]}

    def __len__(self) -> int:
        return len(self._records)

    @property
    def frame_ids(self) -> list[int]:
        return sorted(self._records)

    def record(self, frame_id: int) -> dict:
        try:
            return self._records[frame_id]
        except KeyError:
            raise MalformedResponseError(f"episode has no frame {frame_id}")

    def load_frame(self, frame_id: int) -> Frame:
        rec = self.record(frame_id)
        img = Image.open(self.directory / rec["image"]).convert("RGB")
        return Frame(
            id=frame_id,
            pixels=np.asarray(img, dtype=np.uint8),
            timestamp=rec.get("timestamp"),
        )

    def iter_frames(self) -> Iterator[Frame]:
        for frame_id in self.frame_ids:
            yield self.load_frame(frame_id)

    def annotation_path(self, frame_id: int) -> Path | None:
        rec = self.record(frame_id)
        if "annotation" not in rec:
            return None
        return self.directory / rec["annotation"]

    def _read_f32(self, relpath: str, expected: int) -> np.ndarray:
        path = self.directory / relpath
        try:
            raw = path.read_bytes()
        except FileNotFoundError:
            raise MalformedResponseError(f"missing episode file {path}")
        values = np.frombuffer(raw, dtype="<f4")
        if values.size != expected:
            raise MalformedResponseError(
                f"{path} holds {values.size} float32 values, expected {expected}"
            )
        return values.astype(np.float64)

    def mask_provider(self) -> "ReplayMaskProvider":
        return ReplayMaskProvider(self)

    def embedding_provider(self) -> "ReplayEmbeddingProvider":
        return ReplayEmbeddingProvider(self)


class ReplayMaskProvider:
    def __init__(self, episode: ReplayEpisode):
        self.episode = episode

    def get_masks(self, frame: Frame, prompts: Sequence[str]) -> list[AttentionMap]:
        rec = self.episode.record(frame.id)
        stored = rec.get("maps", {})
        maps = []
        for prompt in prompts:
            if prompt not in stored:
                raise MalformedResponseError(
                    f"episode frame {frame.id} has no stored map for prompt {prompt!r}"
                )
            flat = self.episode._read_f32(stored[prompt], frame.width * frame.height)
            maps.append(check_mask_array(flat.reshape(frame.height, frame.width), frame, prompt))
        return maps


class ReplayEmbeddingProvider:
    def __init__(self, episode: ReplayEpisode):
        self.episode = episode

    def get_embedding(self, frame: Frame) -> Embedding:
        rec = self.episode.record(frame.id)
        values = self.episode._read_f32(rec["embedding"], self.episode.embedding_dim)
        return check_embedding_array(values, self.episode.embedding_dim)


class EpisodeWriter:
    """Writes episodes in the replay layout, one frame at a time."""

    def __init__(self, directory: str | Path, width: int, height: int, embedding_dim: int):
        self.directory = Path(directory)
        self.width = width
        self.height = height
        self.embedding_dim = embedding_dim
        self._frames: list[dict] = []
        for sub in ("frames", "maps", "embeddings"):
            (self.directory / sub).mkdir(parents=True, exist_ok=True)

    def add_frame(
        self,
        frame: Frame,
        embedding: np.ndarray,
        maps: dict[str, np.ndarray],
        annotation: np.ndarray | None = None,
        timestamp: float | None = None,
    ) -> None:
        if frame.width != self.width or frame.height != self.height:
            raise ValueError("frame dimensions do not match episode dimensions")
        stem = f"{frame.id:06d}"
        image_rel = f"frames/{stem}.png"
        Image.fromarray(frame.pixels, mode="RGB").save(self.directory / image_rel)

        emb = np.asarray(embedding, dtype="<f4").ravel()
        if emb.size != self.embedding_dim:
            raise ValueError(f"embedding dim {emb.size} != {self.embedding_dim}")
        emb_rel = f"embeddings/{stem}.f32"
        (self.directory / emb_rel).write_bytes(emb.tobytes())

        map_entries: dict[str, str] = {}
        for prompt, values in maps.items():
            arr = np.asarray(values, dtype="<f4")
            if arr.shape != (self.height, self.width):
                raise ValueError(f"map for {prompt!r} has shape {arr.shape}")
            rel = f"maps/{stem}__{prompt_slug(prompt)}.f32"
            (self.directory / rel).write_bytes(arr.tobytes())
            map_entries[prompt] = rel

        record: dict = {
            "id": frame.id,
            "image": image_rel,
            "embedding": emb_rel,
            "maps": map_entries,
        }
        if timestamp is not None or frame.timestamp is not None:
            record["timestamp"] = timestamp if timestamp is not None else frame.timestamp
        if annotation is not None:
            (self.directory / "gt").mkdir(exist_ok=True)
            gt_rel = f"gt/{stem}.png"
            Image.fromarray(np.asarray(annotation, dtype=np.uint8)).save(self.directory / gt_rel)
            record["annotation"] = gt_rel
        self._frames.append(record)

    def finalize(self, extra: dict | None = None) -> Path:
        manifest = {
            "version": 1,
            "width": self.width,
            "height": self.height,
            "embedding_dim": self.embedding_dim,
            "frames": self._frames,
        }
        if extra:
            manifest.update(extra)
        path = self.directory / MANIFEST_NAME
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=1, sort_keys=True)
            fh.write("\n")
        return path
