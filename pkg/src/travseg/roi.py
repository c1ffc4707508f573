"""Polygon-to-pixel-mask rasterization for ROIs."""

from __future__ import annotations

import numpy as np

from .errors import DegenerateRoiError
from .types import BinaryMask, RoiSpec


def rasterize_roi(roi: RoiSpec, width: int, height: int) -> BinaryMask:
    """Rasterize a normalized ROI polygon onto a width x height pixel grid.

    A pixel is set iff its center, ((col + 0.5) / width, (row + 0.5) / height)
    in normalized coordinates, lies inside the polygon under the even-odd
    (ray crossing) rule. Raises DegenerateRoiError when no pixel is covered.
    """
    if width < 1 or height < 1:
        raise ValueError("width and height must be >= 1")

    cx = (np.arange(width, dtype=np.float64) + 0.5) / width
    cy = (np.arange(height, dtype=np.float64) + 0.5) / height
    px = np.broadcast_to(cx[None, :], (height, width))
    py = np.broadcast_to(cy[:, None], (height, width))

    inside = np.zeros((height, width), dtype=bool)
    verts = roi.polygon
    n = len(verts)
    for i in range(n):
        x1, y1 = verts[i]
        x2, y2 = verts[(i + 1) % n]
        straddles = (y1 > py) != (y2 > py)
        if not straddles.any():
            continue
        # x of the edge at each pixel-center scanline; guarded by `straddles`
        # so y2 == y1 rows never contribute.
        with np.errstate(divide="ignore", invalid="ignore"):
            x_cross = (x2 - x1) * (py - y1) / (y2 - y1) + x1
        inside ^= straddles & (px < x_cross)

    if not inside.any():
        raise DegenerateRoiError(
            f"ROI {roi.name!r} covers no pixel centers at {width}x{height}"
        )
    return BinaryMask(inside)
