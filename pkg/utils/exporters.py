"""
Output writers for solver results.

Trajectory and benchmark tables are written as CSV through pandas with a
fixed float format; reports are JSON with sorted keys and a schema version.
Nothing time-dependent is written, so identical runs give identical files.
"""

import json
import math
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np
import pandas as pd

from models.trajectory import ExtremalTrajectory
from utils.error_handlers import FileSystemError, ErrorContext
from utils.logger import get_logger, log_performance
from utils.settings import AppConstants, output_config

logger = get_logger(__name__)

PathLike = Union[str, Path]


def to_jsonable(value: Any) -> Any:
    """Plain JSON types; numpy scalars and arrays unwrapped, non-finite floats become null."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def dumps_report(report: Dict[str, Any]) -> str:
    """Serialized report with the schema field, sorted keys and a trailing newline."""
    payload = dict(report)
    payload.setdefault("schema", output_config.schema_version)
    return json.dumps(to_jsonable(payload), sort_keys=True, indent=2, allow_nan=False) + "\n"


class ResultExporter:
    """Writes reports and tables into one output directory."""

    def __init__(self, out_dir: Optional[PathLike] = None):
        self.out_dir = Path(out_dir) if out_dir is not None else None
        self.logger = get_logger(self.__class__.__name__)

    def _target(self, name: str) -> Path:
        if self.out_dir is None:
            raise FileSystemError("No output directory configured")
        try:
            self.out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise FileSystemError(str(e), file_path=str(self.out_dir), original_exception=e)
        return self.out_dir / name

    def _write_text(self, path: Path, text: str) -> Path:
        try:
            with open(path, "w", encoding="utf-8", newline="\n") as handle:
                handle.write(text)
        except OSError as e:
            raise FileSystemError(str(e), file_path=str(path), original_exception=e,
                                  context=ErrorContext(operation="export"))
        self.logger.info("Output written", file_path=str(path))
        return path

    def _write_frame(self, frame: pd.DataFrame, path: Path) -> Path:
        return self._write_text(path, frame_to_csv(frame))

    @log_performance("export_trajectory")
    def write_trajectory(self, trajectory: ExtremalTrajectory, name: Optional[str] = None) -> Path:
        """Columns t, x0, x1..xn, chart, c1..cn, h_value."""
        return self._write_frame(trajectory.to_frame(), self._target(name or output_config.trajectory_file))

    def write_report(self, report: Dict[str, Any], stem: Optional[str] = None) -> Path:
        return self._write_text(self._target(f"{stem or output_config.report_file}.json"), dumps_report(report))

    def write_table(self, frame: pd.DataFrame, stem: str, fmt: str = "csv") -> Path:
        """A table as CSV, or as a JSON report with a "rows" list."""
        if fmt == "json":
            rows = frame.to_dict(orient="records")
            return self.write_report({"rows": rows, "columns": list(frame.columns)}, stem)
        return self._write_frame(frame, self._target(f"{stem}.csv"))

    def write_bench(self, frame: pd.DataFrame, fmt: str = "csv") -> Path:
        frame = frame.reindex(columns=AppConstants.BENCH_COLUMNS)
        return self.write_table(frame, output_config.bench_file, fmt)


def frame_to_csv(frame: pd.DataFrame) -> str:
    return frame.to_csv(index=False, float_format=output_config.float_format, lineterminator="\n")


__all__ = [
    "to_jsonable",
    "dumps_report",
    "ResultExporter",
    "frame_to_csv",
]
