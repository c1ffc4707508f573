"""Core domain types: frames, prompt preferences, per-pixel maps, ROIs, embeddings.

All types here are immutable value objects. Arrays are stored as read-only
numpy buffers so instances can be shared freely across threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import ClassVar, Iterable, Iterator

import numpy as np

from .errors import (
    ConfigError,
    DuplicatePromptError,
    EmptyPromptError,
    InvalidRoiError,
    WeightOutOfRangeError,
    ZeroVectorError,
)


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Frame:
    """One RGB camera frame. ``pixels`` is a (height, width, 3) uint8 array."""

    id: int
    pixels: np.ndarray
    timestamp: float | None = None

    def __post_init__(self) -> None:
        px = np.asarray(self.pixels, dtype=np.uint8)
        if px.ndim != 3 or px.shape[2] != 3:
            raise ValueError(f"frame pixels must be (H, W, 3) uint8, got shape {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError("frame must be at least 1x1")
        object.__setattr__(self, "pixels", _freeze(np.ascontiguousarray(px)))

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @classmethod
    def from_bytes(
        cls, frame_id: int, width: int, height: int, raw: bytes, timestamp: float | None = None
    ) -> "Frame":
        if len(raw) != width * height * 3:
            raise ValueError(
                f"pixel buffer length {len(raw)} != width*height*3 = {width * height * 3}"
            )
        px = np.frombuffer(raw, dtype=np.uint8).reshape(height, width, 3)
        return cls(id=frame_id, pixels=px, timestamp=timestamp)


@dataclass(frozen=True)
class PromptWeight:
    """A natural-language terrain prompt with its signed traversability weight."""

    prompt: str
    weight: float

    def __post_init__(self) -> None:
        if not isinstance(self.prompt, str) or not self.prompt.strip():
            raise EmptyPromptError("prompt must be a nonempty string")
        w = float(self.weight)
        if not (-1.0 <= w <= 1.0) or not np.isfinite(w):
            raise WeightOutOfRangeError(f"weight {self.weight!r} outside [-1, 1]")
        object.__setattr__(self, "weight", w)


@dataclass(frozen=True)
class TraversalPrefs:
    """Ordered prompt->weight preference list with unique prompts.

    Prompts are matched by exact, case-sensitive string identity everywhere.
    An empty list is a legal value (used for the operator's "no change"
    answer); the engine requires at least one entry before evaluating frames.
    """

    entries: tuple[PromptWeight, ...] = ()

    def __post_init__(self) -> None:
        entries = tuple(self.entries)
        seen: set[str] = set()
        for e in entries:
            if e.prompt in seen:
                raise DuplicatePromptError(f"duplicate prompt {e.prompt!r}")
            seen.add(e.prompt)
        object.__setattr__(self, "entries", entries)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, float]]) -> "TraversalPrefs":
        return cls(tuple(PromptWeight(p, w) for p, w in pairs))

    def as_pairs(self) -> list[tuple[str, float]]:
        return [(e.prompt, e.weight) for e in self.entries]

    def prompts(self) -> tuple[str, ...]:
        return tuple(e.prompt for e in self.entries)

    def weights(self) -> tuple[float, ...]:
        return tuple(e.weight for e in self.entries)

    def get(self, prompt: str) -> float | None:
        for e in self.entries:
            if e.prompt == prompt:
                return e.weight
        return None

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[PromptWeight]:
        return iter(self.entries)

    def __contains__(self, prompt: str) -> bool:
        return self.get(prompt) is not None


def validate_prefs(raw: Iterable[tuple[str, float]]) -> TraversalPrefs:
    """Build TraversalPrefs from raw pairs, rejecting bad weights and prompts.

    Raises EmptyPromptError, WeightOutOfRangeError, or DuplicatePromptError.
    """
    return TraversalPrefs.from_pairs(raw)


class _MapBase:
    """Common machinery for 2-D per-pixel maps."""

    VALUE_RANGE: ClassVar[tuple[float, float] | None] = None
    DTYPE: ClassVar[type] = np.float64

    def _check(self, values: np.ndarray) -> np.ndarray:
        arr = np.ascontiguousarray(np.asarray(values, dtype=self.DTYPE))
        if arr.ndim != 2:
            raise ValueError(f"map values must be 2-D (H, W), got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("map must be at least 1x1")
        if self.VALUE_RANGE is not None:
            lo, hi = self.VALUE_RANGE
            if arr.size and (arr.min() < lo or arr.max() > hi):
                raise ValueError(
                    f"{type(self).__name__} values outside [{lo}, {hi}]: "
                    f"min={arr.min()}, max={arr.max()}"
                )
        return _freeze(arr)

    @property
    def height(self) -> int:
        return self.values.shape[0]  # type: ignore[attr-defined]

    @property
    def width(self) -> int:
        return self.values.shape[1]  # type: ignore[attr-defined]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape  # type: ignore[attr-defined]


@dataclass(frozen=True)
class ScalarMap(_MapBase):
    """Row-major real-valued map over a frame; see range-typed subclasses."""

    values: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", self._check(self.values))


@dataclass(frozen=True)
class AttentionMap(ScalarMap):
    """Per-prompt model response, one value in [0, 1] per pixel."""

    VALUE_RANGE: ClassVar[tuple[float, float]] = (0.0, 1.0)


@dataclass(frozen=True)
class PooledMap(ScalarMap):
    """Signed traversability evidence in [-1, 1] after weighted pooling."""

    VALUE_RANGE: ClassVar[tuple[float, float]] = (-1.0, 1.0)


@dataclass(frozen=True)
class UncertaintyMap(ScalarMap):
    """1 minus the best prompt response per pixel, in [0, 1]."""

    VALUE_RANGE: ClassVar[tuple[float, float]] = (0.0, 1.0)


@dataclass(frozen=True)
class BinaryMask(_MapBase):
    """{0, 1}-valued pixel mask stored as uint8."""

    values: np.ndarray
    DTYPE: ClassVar[type] = np.uint8

    def __post_init__(self) -> None:
        arr = np.asarray(self.values)
        if arr.dtype == bool:
            arr = arr.astype(np.uint8)
        arr = np.ascontiguousarray(arr.astype(np.uint8, copy=False))
        if arr.ndim != 2:
            raise ValueError(f"mask values must be 2-D (H, W), got shape {arr.shape}")
        if arr.size and arr.max() > 1:
            raise ValueError("binary mask may only contain 0 and 1")
        object.__setattr__(self, "values", _freeze(arr))

    def as_bool(self) -> np.ndarray:
        return self.values.astype(bool)

    def count(self) -> int:
        return int(self.values.sum())


@dataclass(frozen=True)
class Embedding:
    """Fixed-dimension image embedding vector; norm must be positive."""

    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        if arr.ndim != 1 or arr.size < 1:
            raise ValueError(f"embedding must be a non-empty 1-D vector, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("embedding contains non-finite values")
        if float(np.linalg.norm(arr)) == 0.0:
            raise ZeroVectorError("embedding norm must be > 0")
        object.__setattr__(self, "values", _freeze(arr))

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    def norm(self) -> float:
        return float(np.linalg.norm(self.values))


def _segments_properly_cross(
    p1: tuple[float, float],
    p2: tuple[float, float],
    q1: tuple[float, float],
    q2: tuple[float, float],
) -> bool:
    """True iff open segments p1p2 and q1q2 cross at an interior point."""

    def orient(a, b, c) -> float:
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1 = orient(q1, q2, p1)
    d2 = orient(q1, q2, p2)
    d3 = orient(p1, p2, q1)
    d4 = orient(p1, p2, q2)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and d1 != 0 and d2 != 0 and d3 != 0 and d4 != 0


@dataclass(frozen=True)
class RoiSpec:
    """Vehicle-specific image region, as a normalized polygon.

    Vertices are (x, y) with x, y in [0, 1] and origin at the top-left, so a
    single spec serves any camera resolution. Out-of-range coordinates are
    clamped; a polygon that collapses to zero coverage is only rejected at
    rasterization time (DegenerateRoiError).
    """

    name: str
    polygon: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        pts = tuple((float(x), float(y)) for x, y in self.polygon)
        if len(pts) < 3:
            raise InvalidRoiError(f"ROI polygon needs >= 3 vertices, got {len(pts)}")
        clamped = tuple((min(max(x, 0.0), 1.0), min(max(y, 0.0), 1.0)) for x, y in pts)
        n = len(clamped)
        edges = [(clamped[i], clamped[(i + 1) % n]) for i in range(n)]
        for i in range(n):
            for j in range(i + 1, n):
                if j == i or (i == 0 and j == n - 1) or j == i + 1:
                    continue  # adjacent edges share a vertex; only interior crossings count
                if _segments_properly_cross(*edges[i], *edges[j]):
                    raise InvalidRoiError(
                        f"ROI polygon {self.name!r} self-intersects (edges {i} and {j})"
                    )
        object.__setattr__(self, "polygon", clamped)


@dataclass(frozen=True)
class EngineConfig:
    """Thresholds, ROI, and initial preferences for one engine instance.

    theta_scene gates scene-change detection on embedding cosine similarity;
    theta_roi gates unknown-object detection on mean ROI uncertainty;
    theta_trav is the pooled-evidence binarization threshold (strict >, so a
    fully-unknown pixel with pooled value 0 stays non-traversable by default).
    """

    theta_scene: float
    theta_roi: float
    roi: RoiSpec
    initial_prefs: TraversalPrefs
    theta_trav: float = 0.0
    hoc_timeout: float = 60.0
    persist_history: bool = False

    def __post_init__(self) -> None:
        if not (-1.0 <= float(self.theta_scene) <= 1.0):
            raise ConfigError(f"theta_scene {self.theta_scene} outside [-1, 1]")
        if not (0.0 <= float(self.theta_roi) <= 1.0):
            raise ConfigError(f"theta_roi {self.theta_roi} outside [0, 1]")
        if not (-1.0 <= float(self.theta_trav) <= 1.0):
            raise ConfigError(f"theta_trav {self.theta_trav} outside [-1, 1]")
        if float(self.hoc_timeout) <= 0:
            raise ConfigError("hoc_timeout must be positive")
        object.__setattr__(self, "theta_scene", float(self.theta_scene))
        object.__setattr__(self, "theta_roi", float(self.theta_roi))
        object.__setattr__(self, "theta_trav", float(self.theta_trav))
        object.__setattr__(self, "hoc_timeout", float(self.hoc_timeout))
