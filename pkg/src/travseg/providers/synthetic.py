"""Procedural providers: smooth seeded attention fields and unit embeddings.

Everything is a pure function of (seed, frame id, prompt/scene label) via a
keyed blake2 digest, so outputs are reproducible across processes. Scenario
tests use the scene-label hook to place frames at exact cosine similarities.
"""

from __future__ import annotations

import hashlib
from typing import Callable, Mapping, Sequence

import numpy as np

from ..types import AttentionMap, Embedding, Frame


def _keyed_rng(*parts: object) -> np.random.Generator:
    digest = hashlib.blake2b(
        "\x1f".join(str(p) for p in parts).encode("utf-8"), digest_size=8
    ).digest()
    return np.random.default_rng(int.from_bytes(digest, "little"))


def value_noise(rng: np.random.Generator, width: int, height: int, grid: int = 4) -> np.ndarray:
    """Smooth [0, 1] field: random control lattice, bilinearly upsampled."""
    ctrl = rng.random((grid + 1, grid + 1))
    ys = np.linspace(0.0, grid, height)
    xs = np.linspace(0.0, grid, width)
    y0 = np.minimum(ys.astype(int), grid - 1)
    x0 = np.minimum(xs.astype(int), grid - 1)
    ty = (ys - y0)[:, None]
    tx = (xs - x0)[None, :]
    c00 = ctrl[np.ix_(y0, x0)]
    c01 = ctrl[np.ix_(y0, x0 + 1)]
    c10 = ctrl[np.ix_(y0 + 1, x0)]
    c11 = ctrl[np.ix_(y0 + 1, x0 + 1)]
    top = c00 * (1 - tx) + c01 * tx
    bottom = c10 * (1 - tx) + c11 * tx
    return top * (1 - ty) + bottom * ty


def unit_embedding(seed: int, label: str, dim: int = 8) -> Embedding:
    """Deterministic unit vector for a scene label; same label, same vector."""
    rng = _keyed_rng("embed", seed, label)
    vec = rng.standard_normal(dim)
    return Embedding(vec / np.linalg.norm(vec))


class SyntheticMaskProvider:
    """Attention maps as seeded value-noise keyed by (seed, frame id, prompt)."""

    def __init__(self, seed: int = 0, grid: int = 4):
        self.seed = seed
        self.grid = grid

    def get_masks(self, frame: Frame, prompts: Sequence[str]) -> list[AttentionMap]:
        maps = []
        for prompt in prompts:
            rng = _keyed_rng("mask", self.seed, frame.id, prompt)
            maps.append(AttentionMap(value_noise(rng, frame.width, frame.height, self.grid)))
        return maps


class SyntheticEmbeddingProvider:
    """Seeded unit embeddings keyed by a per-frame scene label.

    Without a labeler every frame gets its own label (its id), so consecutive
    frames look like distinct scenes. Pass `scene_label` to group frames.
    """

    def __init__(
        self,
        seed: int = 0,
        dim: int = 8,
        scene_label: Callable[[Frame], str] | Mapping[int, str] | None = None,
    ):
        self.seed = seed
        self.dim = dim
        self._labeler = scene_label

    def label_for(self, frame: Frame) -> str:
        if self._labeler is None:
            return str(frame.id)
        if callable(self._labeler):
            return self._labeler(frame)
        return self._labeler[frame.id]

    def get_embedding(self, frame: Frame) -> Embedding:
        return unit_embedding(self.seed, self.label_for(frame), self.dim)
