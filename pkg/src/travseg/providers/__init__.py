"""Mask and embedding providers: synthetic, replay, remote, and scripted."""

from .base import (
    EmbeddingProvider,
    MaskProvider,
    ProviderSpec,
    REMOTE_URL_ENV,
    build_providers,
    parse_provider_spec,
)
from .replay import EpisodeWriter, ReplayEpisode, prompt_slug
from .remote import RemoteProvider
from .scripted import ScriptedEmbeddingProvider, ScriptedMaskProvider
from .synthetic import SyntheticEmbeddingProvider, SyntheticMaskProvider, unit_embedding

__all__ = [
    "EmbeddingProvider",
    "MaskProvider",
    "ProviderSpec",
    "REMOTE_URL_ENV",
    "build_providers",
    "parse_provider_spec",
    "EpisodeWriter",
    "ReplayEpisode",
    "prompt_slug",
    "RemoteProvider",
    "ScriptedEmbeddingProvider",
    "ScriptedMaskProvider",
    "SyntheticEmbeddingProvider",
    "SyntheticMaskProvider",
    "unit_embedding",
]
