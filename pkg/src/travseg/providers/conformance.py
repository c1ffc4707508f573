"""Shared provider conformance checks.

The same suite runs against the synthetic provider, replay episodes, and any
service implementing the wire protocol, proving the backends interchangeable.
Each check raises AssertionError with a description on violation.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..types import Frame
from .base import EmbeddingProvider, MaskProvider

FIXTURE_PROMPTS = ("dry grass", "bush", "dirt path")


def fixture_frame(frame_id: int = 0, width: int = 64, height: int = 48) -> Frame:
    """Deterministic RGB test image: smooth gradients plus a dark block."""
    y = np.linspace(0, 255, height, dtype=np.float64)[:, None]
    x = np.linspace(0, 255, width, dtype=np.float64)[None, :]
    r = np.broadcast_to(x, (height, width))
    g = np.broadcast_to(y, (height, width))
    b = (x + y) / 2.0
    px = np.stack([r, g, b], axis=2).astype(np.uint8)
    px = px.copy()
    px[height // 3 : height // 2, width // 4 : width // 2] = (10 + frame_id % 7, 10, 10)
    return Frame(id=frame_id, pixels=px)


def check_mask_conformance(
    provider: MaskProvider,
    frame: Frame | None = None,
    prompts: Sequence[str] = FIXTURE_PROMPTS,
) -> list[np.ndarray]:
    frame = frame or fixture_frame()
    first = provider.get_masks(frame, list(prompts))
    assert len(first) == len(prompts), (
        f"expected {len(prompts)} masks, got {len(first)}"
    )
    for i, m in enumerate(first):
        assert m.shape == (frame.height, frame.width), (
            f"mask {i} shape {m.shape} != frame {frame.height}x{frame.width}"
        )
        assert float(m.values.min()) >= 0.0 and float(m.values.max()) <= 1.0, (
            f"mask {i} values outside [0, 1]"
        )
    second = provider.get_masks(frame, list(prompts))
    for i, (a, b) in enumerate(zip(first, second)):
        assert np.array_equal(a.values, b.values), f"mask {i} not deterministic"
    return [m.values for m in first]


def check_embedding_conformance(
    provider: EmbeddingProvider, frame: Frame | None = None
) -> np.ndarray:
    frame = frame or fixture_frame()
    first = provider.get_embedding(frame)
    assert first.dim >= 1 and first.norm() > 0, "embedding must be non-empty and nonzero"
    second = provider.get_embedding(frame)
    assert first.dim == second.dim, "embedding dimension drifted between calls"
    assert np.array_equal(first.values, second.values), "embedding not deterministic"
    return first.values
