"""Pure per-pixel map algebra: weighted max pooling, uncertainty, ROI scoring.

Every function here is a pure function of immutable inputs; callers may
parallelize across frames freely.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import DimensionMismatchError, EmptyInputError, EmptyRoiError
from .types import AttentionMap, BinaryMask, PooledMap, TraversalPrefs, UncertaintyMap


def _stack(masks: Sequence[AttentionMap]) -> np.ndarray:
    if len(masks) == 0:
        raise EmptyInputError("need at least one attention map")
    shape = masks[0].shape
    for i, m in enumerate(masks):
        if m.shape != shape:
            raise DimensionMismatchError(
                f"mask {i} has shape {m.shape}, expected {shape}"
            )
    return np.stack([m.values for m in masks], axis=0)


def weighted_max_pool(masks: Sequence[AttentionMap], prefs: TraversalPrefs) -> PooledMap:
    """Pool per-prompt attention maps into one signed traversability map.

    Each map is scaled by its prompt weight; at every pixel the scaled value
    with the largest absolute magnitude wins and is emitted with its sign.
    Ties break toward the earliest prompt in the preference order, which keeps
    the output deterministic for a fixed, operator-specified ordering.
    """
    if len(prefs) == 0:
        raise EmptyInputError("preference list is empty")
    if len(masks) != len(prefs):
        raise DimensionMismatchError(
            f"{len(masks)} masks for {len(prefs)} prompt weights"
        )
    stacked = _stack(masks)  # (k, H, W)
    weights = np.asarray(prefs.weights(), dtype=np.float64).reshape(-1, 1, 1)
    mu = weights * stacked
    winner = np.argmax(np.abs(mu), axis=0)  # first max wins: lowest index
    pooled = np.take_along_axis(mu, winner[None, :, :], axis=0)[0]
    return PooledMap(pooled)


def uncertainty_map(masks: Sequence[AttentionMap]) -> UncertaintyMap:
    """Per-pixel 1 - max over all prompt responses.

    High where no prompt explains the pixel; adding a map can only lower it.
    """
    stacked = _stack(masks)
    return UncertaintyMap(1.0 - stacked.max(axis=0))


def roi_uncertainty_score(unc: UncertaintyMap, roi_mask: BinaryMask) -> float:
    """Arithmetic mean of the uncertainty map over the ROI's set pixels."""
    if unc.shape != roi_mask.shape:
        raise DimensionMismatchError(
            f"uncertainty map {unc.shape} vs ROI mask {roi_mask.shape}"
        )
    selected = roi_mask.as_bool()
    if not selected.any():
        raise EmptyRoiError("ROI mask has no set pixels")
    return float(unc.values[selected].mean())


def binarize(pooled: PooledMap, theta_trav: float) -> BinaryMask:
    """Threshold pooled evidence into a traversable/non-traversable mask.

    Strict inequality: pixels exactly at the threshold (including the
    fully-unknown pooled value 0 at the default threshold) are non-traversable.
    """
    return BinaryMask(pooled.values > theta_trav)
