"""CSV and JSON ingestion and emission for the CLI."""

import json
import logging
import sys
from pathlib import Path
from typing import TextIO

import numpy as np
import pandas as pd
from pydantic import BaseModel, ValidationError

from app.backend.core.exceptions import BadColumn, DataError, GroupError
from app.backend.models.dataset import Dataset
from app.backend.models.permutation import BlockGroup, ExplicitGroup
from app.backend.schemas.group import GroupFile
from app.backend.schemas.simulation import SimulationReport
from app.backend.services.permutations import group_from_file, group_to_file

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


def read_frame(path: str | Path) -> pd.DataFrame:
    """
    Raises
    ------
    DataError
        If the file is missing, unparsable, non-numeric or has missing values.
    """
    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except FileNotFoundError as exc:
        raise DataError(f"CSV file '{path}' not found", {"path": str(path)}) from exc
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise DataError(f"Could not parse '{path}': {exc}", {"path": str(path)}) from exc
    if frame.empty:
        raise DataError("CSV has no data rows", {"path": str(path)})
    if frame.isna().any().any():
        missing = [str(c) for c in frame.columns[frame.isna().any()]]
        raise DataError("CSV has missing values", {"columns": missing})
    non_numeric = [str(c) for c in frame.columns if not pd.api.types.is_numeric_dtype(frame[c])]
    if non_numeric:
        raise DataError("CSV has non-numeric columns", {"columns": non_numeric})
    return frame


def _split(frame: pd.DataFrame, named: list[str]) -> tuple[list[str], list[str]]:
    columns = [str(c) for c in frame.columns]
    frame.columns = columns
    for col in named:
        if col not in columns:
            raise BadColumn(col, columns)
    if len(set(named)) != len(named):
        raise DataError("designated columns must differ", {"columns": named})
    return columns, [c for c in columns if c not in named]


def read_design(
    path: str | Path, target_col: str | None = None, drop_cols: tuple[str, ...] = ()
) -> tuple[np.ndarray | None, np.ndarray]:
    """
    ``x`` from ``target_col`` (if given) and ``z`` from every column not named.
    """
    frame = read_frame(path)
    named = ([target_col] if target_col else []) + list(drop_cols)
    _, z_cols = _split(frame, named)
    z = frame[z_cols].to_numpy(dtype=np.float64) if z_cols else np.zeros((len(frame), 0))
    x = frame[target_col].to_numpy(dtype=np.float64) if target_col else None
    return x, z


def read_dataset(path: str | Path, target_col: str, response_col: str) -> Dataset:
    """
    Split a CSV into ``x`` (target), ``y`` (response) and ``z`` (every other column).

    Raises
    ------
    BadColumn
        If either designated column is missing.
    DataError
        If the CSV is malformed or has missing values.
    """
    frame = read_frame(path)
    _, z_cols = _split(frame, [target_col, response_col])
    z = frame[z_cols].to_numpy(dtype=np.float64) if z_cols else np.zeros((len(frame), 0))
    logger.info(f"read {len(frame)} rows, {len(z_cols)} nuisance columns from {path}")
    return Dataset(
        x=frame[target_col].to_numpy(dtype=np.float64),
        z=z,
        y=frame[response_col].to_numpy(dtype=np.float64),
    )


def dataset_frame(ds: Dataset, target_col: str = "x", response_col: str = "y") -> pd.DataFrame:
    frame = pd.DataFrame(ds.z, columns=[f"z{j + 1}" for j in range(ds.p)])
    frame[target_col] = ds.x
    frame[response_col] = ds.y
    return frame


def write_dataset(ds: Dataset, path: str | Path, target_col: str = "x", response_col: str = "y") -> None:
    dataset_frame(ds, target_col, response_col).to_csv(path, index=False, float_format=FLOAT_FORMAT)


def write_report(report: SimulationReport, out: str | Path | TextIO | None = None) -> None:
    """Write the report CSV to a path, an open stream, or stdout."""
    frame = report.to_frame()
    target = sys.stdout if out is None or out == "-" else out
    frame.to_csv(target, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def dump_json(model: BaseModel | dict, out: str | Path | TextIO | None = None) -> str:
    text = model.model_dump_json(indent=2) if isinstance(model, BaseModel) else json.dumps(model, indent=2)
    if out is None or out == "-":
        sys.stdout.write(text + "\n")
    elif isinstance(out, (str, Path)):
        Path(out).write_text(text + "\n")
    else:
        out.write(text + "\n")
    return text


def read_group(path: str | Path) -> ExplicitGroup | BlockGroup:
    """
    Raises
    ------
    GroupError
        If the file is missing, is not JSON, or describes no valid group.
    """
    try:
        raw = Path(path).read_text()
    except OSError as exc:
        raise GroupError(f"group file '{path}' not readable", {"path": str(path)}) from exc
    try:
        gf = GroupFile.model_validate_json(raw)
    except ValidationError as exc:
        raise GroupError("invalid group file", {"path": str(path), "errors": [e["msg"] for e in exc.errors()]}) from exc
    return group_from_file(gf)


def write_group(g: ExplicitGroup | BlockGroup, path: str | Path) -> None:
    Path(path).write_text(group_to_file(g).model_dump_json(exclude_none=True, indent=2) + "\n")
