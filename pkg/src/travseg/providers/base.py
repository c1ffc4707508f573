"""Provider protocols, spec parsing, and boundary validation.

Providers abstract the two model backends: one turns (frame, prompt) into a
[0, 1] attention map, the other turns a frame into a fixed-dimension
embedding. Anything crossing the boundary is validated here so malformed
data never propagates inward.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

from ..errors import ConfigError, MalformedResponseError
from ..types import AttentionMap, Embedding, Frame

REMOTE_URL_ENV = "TRAVSEG_REMOTE_URL"


@runtime_checkable
class MaskProvider(Protocol):
    def get_masks(self, frame: Frame, prompts: Sequence[str]) -> list[AttentionMap]:
        """One attention map per prompt, same order, frame-sized, values in [0, 1]."""
        ...


@runtime_checkable
class EmbeddingProvider(Protocol):
    def get_embedding(self, frame: Frame) -> Embedding:
        """Deterministic fixed-dimension embedding of the frame."""
        ...


def check_mask_array(values: np.ndarray, frame: Frame, prompt: str) -> AttentionMap:
    """Validate raw mask data from a provider; wrap as AttentionMap."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.shape != (frame.height, frame.width):
        raise MalformedResponseError(
            f"mask for prompt {prompt!r} has shape {arr.shape}, "
            f"frame is {frame.height}x{frame.width}"
        )
    if not np.all(np.isfinite(arr)):
        raise MalformedResponseError(f"mask for prompt {prompt!r} has non-finite values")
    if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
        raise MalformedResponseError(
            f"mask for prompt {prompt!r} outside [0, 1]: min={arr.min()}, max={arr.max()}"
        )
    return AttentionMap(arr)


def check_mask_count(maps: Sequence[AttentionMap], prompts: Sequence[str]) -> None:
    if len(maps) != len(prompts):
        raise MalformedResponseError(
            f"provider returned {len(maps)} masks for {len(prompts)} prompts"
        )


def check_embedding_array(values: np.ndarray, expected_dim: int | None = None) -> Embedding:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise MalformedResponseError(f"embedding must be 1-D and non-empty, got shape {arr.shape}")
    if expected_dim is not None and arr.size != expected_dim:
        raise MalformedResponseError(
            f"embedding dimension changed: got {arr.size}, expected {expected_dim}"
        )
    if not np.all(np.isfinite(arr)) or float(np.linalg.norm(arr)) == 0.0:
        raise MalformedResponseError("embedding is zero or non-finite")
    return Embedding(arr)


@dataclass(frozen=True)
class ProviderSpec:
    """Where masks/embeddings come from: synthetic, replay, or remote.

    - synthetic: procedurally generated, keyed by `seed`
    - replay: read back from an episode directory recorded earlier
    - remote: fetched from an inference service at `endpoint`
    """

    kind: str
    seed: int = 0
    directory: Path | None = None
    endpoint: str | None = None
    timeout: float = 30.0

    def __post_init__(self) -> None:
        if self.kind not in ("synthetic", "replay", "remote"):
            raise ConfigError(f"unknown provider kind {self.kind!r}")
        if self.kind == "replay":
            if self.directory is None:
                raise ConfigError("replay provider needs an episode directory")
            manifest = Path(self.directory) / "manifest.json"
            if not manifest.is_file():
                raise ConfigError(f"replay directory has no manifest: {manifest}")
        if self.kind == "remote":
            endpoint = os.environ.get(REMOTE_URL_ENV) or self.endpoint
            if not endpoint or not endpoint.startswith(("http://", "https://")):
                raise ConfigError(f"remote provider needs a well-formed URL, got {endpoint!r}")
            object.__setattr__(self, "endpoint", endpoint)


def parse_provider_spec(text: str) -> ProviderSpec:
    """Parse CLI shorthand: 'synthetic[:seed=N]', 'replay:DIR', 'remote:URL'."""
    kind, _, rest = text.partition(":")
    if kind == "synthetic":
        seed = 0
        if rest:
            key, _, val = rest.partition("=")
            if key != "seed" or not val.lstrip("-").isdigit():
                raise ConfigError(f"bad synthetic provider spec {text!r}")
            seed = int(val)
        return ProviderSpec(kind="synthetic", seed=seed)
    if kind == "replay":
        return ProviderSpec(kind="replay", directory=Path(rest))
    if kind == "remote":
        return ProviderSpec(kind="remote", endpoint=rest or None)
    raise ConfigError(f"unknown provider kind {kind!r}")


def build_providers(spec: ProviderSpec):
    """Instantiate (mask_provider, embedding_provider) for a spec."""
    if spec.kind == "synthetic":
        from .synthetic import SyntheticEmbeddingProvider, SyntheticMaskProvider

        return SyntheticMaskProvider(seed=spec.seed), SyntheticEmbeddingProvider(seed=spec.seed)
    if spec.kind == "replay":
        from .replay import ReplayEpisode

        episode = ReplayEpisode(spec.directory)
        return episode.mask_provider(), episode.embedding_provider()
    from .remote import RemoteProvider

    remote = RemoteProvider(spec.endpoint, timeout=spec.timeout)
    return remote, remote
