"""Callable-backed providers for constructing exact test scenarios."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from ..types import AttentionMap, Embedding, Frame
from .base import check_embedding_array, check_mask_array


class ScriptedMaskProvider:
    """Masks computed by a user function of (frame, prompt) -> (H, W) array."""

    def __init__(self, fn: Callable[[Frame, str], np.ndarray]):
        self._fn = fn

    def get_masks(self, frame: Frame, prompts: Sequence[str]) -> list[AttentionMap]:
        return [check_mask_array(self._fn(frame, p), frame, p) for p in prompts]


class ScriptedEmbeddingProvider:
    """Embeddings computed by a user function of frame -> 1-D array."""

    def __init__(self, fn: Callable[[Frame], np.ndarray]):
        self._fn = fn
        self._dim: int | None = None

    def get_embedding(self, frame: Frame) -> Embedding:
        emb = check_embedding_array(np.asarray(self._fn(frame)), self._dim)
        self._dim = emb.dim
        return emb
