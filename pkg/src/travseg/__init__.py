"""Vehicle-agnostic off-road traversability evaluation.

Combines prompt-weighted attention pooling, uncertainty-gated unknown-object
detection inside a vehicle ROI, embedding-based scene memory, and a blocking
human-operator-call loop, with pluggable model providers.
"""

from .engine import (
    EXTERNAL_OPERATOR,
    Engine,
    EngineEvent,
    FrameOutcome,
    HocReason,
    HocRequest,
    HocResponse,
    NullOperator,
    Operator,
    ScriptedOperator,
)
from .maskops import binarize, roi_uncertainty_score, uncertainty_map, weighted_max_pool
from .memory import HistoryEntry, SceneMemory, cosine_similarity, merge_prefs
from .roi import rasterize_roi
from .types import (
    AttentionMap,
    BinaryMask,
    Embedding,
    EngineConfig,
    Frame,
    PooledMap,
    PromptWeight,
    RoiSpec,
    ScalarMap,
    TraversalPrefs,
    UncertaintyMap,
    validate_prefs,
)

__version__ = "0.1.0"

__all__ = [
    "EXTERNAL_OPERATOR",
    "Engine",
    "EngineEvent",
    "FrameOutcome",
    "HocReason",
    "HocRequest",
    "HocResponse",
    "NullOperator",
    "Operator",
    "ScriptedOperator",
    "binarize",
    "roi_uncertainty_score",
    "uncertainty_map",
    "weighted_max_pool",
    "HistoryEntry",
    "SceneMemory",
    "cosine_similarity",
    "merge_prefs",
    "rasterize_roi",
    "AttentionMap",
    "BinaryMask",
    "Embedding",
    "EngineConfig",
    "Frame",
    "PooledMap",
    "PromptWeight",
    "RoiSpec",
    "ScalarMap",
    "TraversalPrefs",
    "UncertaintyMap",
    "validate_prefs",
    "__version__",
]
