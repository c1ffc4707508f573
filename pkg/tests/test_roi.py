import numpy as np
import pytest

from travseg.errors import DegenerateRoiError
from travseg.roi import rasterize_roi
from travseg.types import RoiSpec

from oracles import point_in_polygon_ray_cast


def test_full_frame_square_covers_all_pixels():
    roi = RoiSpec("full", ((0, 0), (1, 0), (1, 1), (0, 1)))
    mask = rasterize_roi(roi, 4, 4)
    assert mask.count() == 16


def test_bottom_half_polygon_covers_bottom_rows():
    roi = RoiSpec("bottom", ((0, 0.5), (1, 0.5), (1, 1), (0, 1)))
    mask = rasterize_roi(roi, 4, 4)
    assert mask.count() == 8
    assert mask.values.tolist() == [[0, 0, 0, 0], [0, 0, 0, 0], [1, 1, 1, 1], [1, 1, 1, 1]]


def test_polygon_clamped_to_zero_area_is_degenerate():
    roi = RoiSpec("outside", ((-1.0, -1.0), (-2.0, -1.0), (-1.0, -2.0)))
    with pytest.raises(DegenerateRoiError):
        rasterize_roi(roi, 8, 8)


def test_tiny_sliver_with_no_pixel_center_is_degenerate():
    roi = RoiSpec("sliver", ((0.0, 0.0), (0.01, 0.0), (0.0, 0.01)))
    with pytest.raises(DegenerateRoiError):
        rasterize_roi(roi, 4, 4)


def test_matches_per_pixel_ray_cast_oracle():
    rng = np.random.default_rng(42)
    for _ in range(25):
        # Random triangles with guaranteed pixel coverage.
        while True:
            pts = rng.random((3, 2))
            area = 0.5 * abs(
                (pts[1, 0] - pts[0, 0]) * (pts[2, 1] - pts[0, 1])
                - (pts[2, 0] - pts[0, 0]) * (pts[1, 1] - pts[0, 1])
            )
            if area > 0.08:
                break
        roi = RoiSpec("tri", tuple(map(tuple, pts)))
        width, height = int(rng.integers(4, 24)), int(rng.integers(4, 24))
        mask = rasterize_roi(roi, width, height)
        for row in range(height):
            for col in range(width):
                x = (col + 0.5) / width
                y = (row + 0.5) / height
                assert mask.values[row, col] == point_in_polygon_ray_cast(
                    x, y, list(roi.polygon)
                ), f"pixel ({row},{col}) disagrees with oracle"


def test_deterministic():
    roi = RoiSpec("tri", ((0.1, 0.1), (0.9, 0.2), (0.5, 0.9)))
    a = rasterize_roi(roi, 33, 17)
    b = rasterize_roi(roi, 33, 17)
    assert np.array_equal(a.values, b.values)


def test_scale_consistency_doubling_resolution():
    rng = np.random.default_rng(7)
    for _ in range(10):
        while True:
            pts = rng.random((3, 2))
            area = 0.5 * abs(
                (pts[1, 0] - pts[0, 0]) * (pts[2, 1] - pts[0, 1])
                - (pts[2, 0] - pts[0, 0]) * (pts[1, 1] - pts[0, 1])
            )
            if area > 0.1:
                break
        roi = RoiSpec("tri", tuple(map(tuple, pts)))
        width, height = int(rng.integers(6, 20)), int(rng.integers(6, 20))
        low = rasterize_roi(roi, width, height).count()
        high = rasterize_roi(roi, width * 2, height * 2).count()
        assert high >= 2 * low
