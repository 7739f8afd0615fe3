"""
Flow CSV Ingest

Parse, validate, order and write flow-record datasets.

CSV schema (header required, UTF-8, comma-separated):

    timestamp_us,src_ip,dst_ip,src_port,dst_port,duration_s,src_bytes,dst_bytes,label

Columns may appear in any order; missing or extra columns are rejected.
"""

import re
from pathlib import Path
from typing import Iterable, Union

import pandas as pd
from pydantic import ValidationError

from src.errors import EmptyDatasetError, MissingArtifactError, RowError, SchemaError
from src.models import FLOW_COLUMNS, FlowDataset, FlowRecord
from src.utils import get_logger

logger = get_logger(__name__)

PathLike = Union[str, Path]

_PARSER_LINE = re.compile(r"line (\d+)")


def parse_flow_csv(path: PathLike) -> FlowDataset:
    """
    Parse a flow CSV into a FlowDataset, preserving row order.

    Args:
        path: CSV file path

    Returns:
        FlowDataset with one record per data row

    Raises:
        MissingArtifactError: file does not exist
        EmptyDatasetError: no header or no data rows
        SchemaError: a schema column is missing or an unknown column is present
        RowError: a field fails to parse or violates a record invariant
    """
    path = Path(path)
    if not path.is_file():
        raise MissingArtifactError(f"Flow file not found: {path}", path=str(path))

    try:
        frame = pd.read_csv(
            path,
            dtype=str,
            keep_default_na=False,
            encoding="utf-8",
            skipinitialspace=True,
        )
    except pd.errors.EmptyDataError as exc:
        raise EmptyDatasetError(f"Flow file is empty: {path}", path=str(path)) from exc
    except pd.errors.ParserError as exc:
        match = _PARSER_LINE.search(str(exc))
        line = int(match.group(1)) if match else -1
        raise RowError(f"line {line}: malformed row ({exc})", line=line) from exc

    frame.columns = [str(column).strip() for column in frame.columns]
    _check_columns(list(frame.columns))

    if frame.empty:
        raise EmptyDatasetError(f"Flow file has a header but no rows: {path}", path=str(path))

    records = []
    for offset, row in enumerate(frame.to_dict(orient="records")):
        # header is line 1
        line = offset + 2
        try:
            records.append(FlowRecord.model_validate(row))
        except ValidationError as exc:
            error = exc.errors()[0]
            field = str(error["loc"][0]) if error.get("loc") else None
            raise RowError(
                f"line {line}: {field}: {error['msg']} (value={row.get(field)!r})",
                line=line,
                field=field,
            ) from exc

    dataset = FlowDataset(records=tuple(records))
    logger.info("flows_parsed", path=str(path), records=len(dataset), classes=len(dataset.classes))
    return dataset


def _check_columns(columns: list) -> None:
    """Reject missing and unknown columns, naming the first offender."""
    for column in FLOW_COLUMNS:
        if column not in columns:
            raise SchemaError(f"Missing column '{column}'", column=column)
    for column in columns:
        if column not in FLOW_COLUMNS:
            raise SchemaError(f"Unexpected column '{column}'", column=column)


def sort_flows(dataset: FlowDataset) -> FlowDataset:
    """
    Stable sort by (timestamp, src_ip, dst_ip, src_port).

    Records with equal keys keep their input order.
    """
    return FlowDataset(records=tuple(sorted(dataset.records, key=FlowRecord.sort_key)))


def write_flow_csv(records: Iterable[FlowRecord], path: PathLike) -> Path:
    """
    Write records in canonical column order.

    Floats are written with shortest round-trip repr so the output parses back
    to identical records and reruns produce byte-identical files.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = [record.to_row() for record in records]
    frame = pd.DataFrame(rows, columns=list(FLOW_COLUMNS))
    if rows:
        frame["duration_s"] = [repr(float(value)) for value in frame["duration_s"]]
    frame.to_csv(path, index=False, lineterminator="\n", encoding="utf-8")
    return path
