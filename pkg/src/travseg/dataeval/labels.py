"""Dataset label mappings and ground-truth annotation loading.

A mapping file assigns every class of a dataset's annotation palette a role:
traversable, non_traversable, or ignore. Ignored pixels are excluded from
both the numerator and denominator of IoU. Annotations are resampled to the
prediction resolution with nearest-neighbor so labels never bleed.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np
import yaml
from PIL import Image, UnidentifiedImageError

from ..errors import ConfigError, DecodeError, UnmappedClassError
from ..types import BinaryMask


class Role(str, Enum):
    TRAVERSABLE = "traversable"
    NON_TRAVERSABLE = "non_traversable"
    IGNORE = "ignore"


@dataclass(frozen=True)
class LabelClass:
    key: int | tuple[int, int, int]
    name: str
    role: Role


@dataclass(frozen=True)
class LabelMapping:
    dataset: str
    kind: str  # "id" for single-channel class ids, "rgb" for color rasters
    classes: tuple[LabelClass, ...]

    def __post_init__(self) -> None:
        if self.kind not in ("id", "rgb"):
            raise ConfigError(f"mapping kind must be 'id' or 'rgb', got {self.kind!r}")

    def role_table(self) -> dict:
        return {c.key: c.role for c in self.classes}


def load_mapping(path: str | Path) -> LabelMapping:
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError(f"mapping file not found: {path}")
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}")
    if not isinstance(doc, dict) or "classes" not in doc:
        raise ConfigError(f"{path}: mapping needs a 'classes' list")
    kind = str(doc.get("format", "id"))
    classes = []
    for i, item in enumerate(doc["classes"]):
        if not isinstance(item, dict) or "role" not in item:
            raise ConfigError(f"{path}: classes[{i}] needs a 'role'")
        try:
            role = Role(item["role"])
        except ValueError:
            raise ConfigError(
                f"{path}: classes[{i}] has unknown role {item['role']!r} "
                f"(expected traversable/non_traversable/ignore)"
            )
        if kind == "rgb":
            if "color" not in item:
                raise ConfigError(f"{path}: classes[{i}] needs a 'color' [r, g, b]")
            key = tuple(int(c) for c in item["color"])
            if len(key) != 3:
                raise ConfigError(f"{path}: classes[{i}] color must have 3 components")
        else:
            if "id" not in item:
                raise ConfigError(f"{path}: classes[{i}] needs an 'id'")
            key = int(item["id"])
        classes.append(LabelClass(key=key, name=str(item.get("name", key)), role=role))
    if not classes:
        raise ConfigError(f"{path}: mapping has no classes")
    return LabelMapping(dataset=str(doc.get("dataset", path.stem)), kind=kind, classes=tuple(classes))


def _decode_annotation(path: Path, kind: str) -> np.ndarray:
    try:
        img = Image.open(path)
        img.load()
    except (FileNotFoundError, UnidentifiedImageError, OSError) as exc:
        raise DecodeError(f"cannot decode annotation {path}: {exc}")
    if kind == "rgb":
        return np.asarray(img.convert("RGB"), dtype=np.uint8)
    if img.mode in ("P", "L", "I", "I;16"):
        return np.asarray(img.convert("I"), dtype=np.int64)
    # Grayscale content stored as RGB: accept if channels agree.
    arr = np.asarray(img.convert("RGB"), dtype=np.int64)
    if not (arr[..., 0] == arr[..., 1]).all() or not (arr[..., 1] == arr[..., 2]).all():
        raise DecodeError(
            f"{path}: id-format mapping but annotation is a non-grayscale RGB image"
        )
    return arr[..., 0]


def _resample_nearest(img_arr: np.ndarray, width: int, height: int) -> np.ndarray:
    if img_arr.shape[:2] == (height, width):
        return img_arr
    rows = (np.arange(height) + 0.5) * img_arr.shape[0] / height
    cols = (np.arange(width) + 0.5) * img_arr.shape[1] / width
    rows = np.minimum(rows.astype(int), img_arr.shape[0] - 1)
    cols = np.minimum(cols.astype(int), img_arr.shape[1] - 1)
    return img_arr[np.ix_(rows, cols)]


def load_annotation(
    path: str | Path, mapping: LabelMapping, width: int, height: int
) -> tuple[BinaryMask, BinaryMask]:
    """Decode an annotation raster into (traversable_mask, ignore_mask).

    Every class value present must be covered by the mapping; otherwise
    UnmappedClassError lists the offending ids/colors.
    """
    arr = _decode_annotation(Path(path), mapping.kind)
    arr = _resample_nearest(arr, width, height)

    if mapping.kind == "rgb":
        flat = (
            arr[..., 0].astype(np.int64) * 65536
            + arr[..., 1].astype(np.int64) * 256
            + arr[..., 2].astype(np.int64)
        )
        table = {
            (k[0] * 65536 + k[1] * 256 + k[2]): role
            for k, role in mapping.role_table().items()
        }
        display = lambda v: (v // 65536, (v // 256) % 256, v % 256)
    else:
        flat = arr
        table = mapping.role_table()
        display = lambda v: v

    present = np.unique(flat)
    missing = [display(int(v)) for v in present if int(v) not in table]
    if missing:
        raise UnmappedClassError(missing)

    trav = np.zeros(flat.shape, dtype=np.uint8)
    ignore = np.zeros(flat.shape, dtype=np.uint8)
    for value in present:
        role = table[int(value)]
        cells = flat == value
        if role is Role.TRAVERSABLE:
            trav[cells] = 1
        elif role is Role.IGNORE:
            ignore[cells] = 1
    return BinaryMask(trav), BinaryMask(ignore)
