"""Dataset ingestion, MIoU scoring, and operator-call sweep running."""

from importlib import resources
from pathlib import Path

from .labels import LabelClass, LabelMapping, Role, load_annotation, load_mapping
from .metrics import ConfusionAccumulator, EvalReport, IouResult, miou
from .runner import (
    HocSweepResult,
    SWEEP_CSV_HEADER,
    SweepRow,
    run_episode_eval,
    run_hoc_sweep,
    write_report,
    write_sweep_csv,
)


def bundled_mapping_path(name: str) -> Path:
    """Path of a palette mapping shipped with the package (rellis3d, rugd, deepscene)."""
    ref = resources.files(__package__) / "mappings" / f"{name}.yaml"
    return Path(str(ref))


__all__ = [
    "LabelClass",
    "LabelMapping",
    "Role",
    "load_annotation",
    "load_mapping",
    "ConfusionAccumulator",
    "EvalReport",
    "IouResult",
    "miou",
    "HocSweepResult",
    "SWEEP_CSV_HEADER",
    "SweepRow",
    "run_episode_eval",
    "run_hoc_sweep",
    "write_report",
    "write_sweep_csv",
    "bundled_mapping_path",
]
