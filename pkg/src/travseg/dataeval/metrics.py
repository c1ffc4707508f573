"""Two-class IoU metrics with ignore handling.

IoU is computed for the traversable class (1s) and the non-traversable class
(0s) over non-ignored pixels; MIoU is their mean. A class with an empty
union (absent from both prediction and ground truth) scores 1.0 by
convention, since nothing was there to get wrong.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DimensionMismatchError
from ..types import BinaryMask


@dataclass(frozen=True)
class IouResult:
    iou_traversable: float
    iou_non_traversable: float
    miou: float


@dataclass
class ConfusionAccumulator:
    """Pixel-accumulated 2x2 confusion over any number of frames."""

    tp: int = 0  # pred 1, gt 1
    fp: int = 0  # pred 1, gt 0
    fn: int = 0  # pred 0, gt 1
    tn: int = 0  # pred 0, gt 0
    frames: int = 0

    def add(self, pred: BinaryMask, gt: BinaryMask, ignore: BinaryMask | None = None) -> None:
        if pred.shape != gt.shape:
            raise DimensionMismatchError(f"pred {pred.shape} vs gt {gt.shape}")
        keep = np.ones(pred.shape, dtype=bool)
        if ignore is not None:
            if ignore.shape != pred.shape:
                raise DimensionMismatchError(f"ignore {ignore.shape} vs pred {pred.shape}")
            keep = ~ignore.as_bool()
        p = pred.as_bool()[keep]
        g = gt.as_bool()[keep]
        self.tp += int(np.count_nonzero(p & g))
        self.fp += int(np.count_nonzero(p & ~g))
        self.fn += int(np.count_nonzero(~p & g))
        self.tn += int(np.count_nonzero(~p & ~g))
        self.frames += 1

    def result(self) -> IouResult:
        iou_trav = _iou(self.tp, self.tp + self.fp + self.fn)
        iou_non = _iou(self.tn, self.tn + self.fp + self.fn)
        return IouResult(
            iou_traversable=iou_trav,
            iou_non_traversable=iou_non,
            miou=(iou_trav + iou_non) / 2.0,
        )


def _iou(intersection: int, union: int) -> float:
    if union == 0:
        return 1.0
    return intersection / union


def miou(pred: BinaryMask, gt: BinaryMask, ignore: BinaryMask | None = None) -> IouResult:
    """Single-pair IoU for both classes plus their mean."""
    acc = ConfusionAccumulator()
    acc.add(pred, gt, ignore)
    return acc.result()


@dataclass(frozen=True)
class EvalReport:
    """Episode-level MIoU report, pixel-accumulated across frames."""

    dataset: str
    miou: float
    iou_traversable: float
    iou_non_traversable: float
    frame_count: int
    config_snapshot: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "miou": self.miou,
            "iou_traversable": self.iou_traversable,
            "iou_non_traversable": self.iou_non_traversable,
            "frame_count": self.frame_count,
            "config": self.config_snapshot,
        }
