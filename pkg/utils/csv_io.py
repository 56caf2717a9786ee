"""CSV ingestion and report emission (comma separated, '.' decimal, LF endings)."""
import csv
import logging
import math
from pathlib import Path
from typing import Iterable, List, Mapping, Optional, Sequence, Union

import numpy as np

from utils.errors import InputValidationError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def _parse_cell(text: str, path: str, line: int, column: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise InputValidationError(f"non-numeric cell {text!r}", path, line, column)
    if not math.isfinite(value):
        raise InputValidationError(f"non-finite cell {text!r}", path, line, column)
    return value


def _is_header(row: Sequence[str]) -> bool:
    for cell in row:
        try:
            float(cell)
        except ValueError:
            return True
    return False


def read_matrix_csv(path: PathLike) -> np.ndarray:
    """Parse a numeric matrix; a single non-numeric first row is taken as a header."""
    path = str(path)
    try:
        with open(path, newline="", encoding="utf-8") as f:
            rows = [(n, row) for n, row in enumerate(csv.reader(f), start=1)]
    except OSError as e:
        raise InputValidationError(f"cannot read file ({e.strerror})", path)

    rows = [(n, [c.strip() for c in row]) for n, row in rows if any(c.strip() for c in row)]
    if not rows:
        raise InputValidationError("empty file", path)
    if _is_header(rows[0][1]):
        logger.debug(f"{path}: treating line {rows[0][0]} as a header")
        rows = rows[1:]
        if not rows:
            raise InputValidationError("header but no data rows", path)

    width = len(rows[0][1])
    data: List[List[float]] = []
    for line, row in rows:
        if len(row) != width:
            raise InputValidationError(f"expected {width} columns, found {len(row)}", path, line)
        data.append([_parse_cell(cell, path, line, col) for col, cell in enumerate(row, start=1)])
    return np.array(data, dtype=np.float64)


def _format(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def write_rows(path: PathLike, rows: Iterable[Mapping[str, object]], fieldnames: Sequence[str]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(fieldnames)
        for row in rows:
            writer.writerow([_format(row.get(name)) for name in fieldnames])
    logger.debug(f"Wrote {path}")
    return path


def write_matrix_csv(path: PathLike, values: np.ndarray, header: Optional[Sequence[str]] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    values = np.asarray(values, dtype=np.float64)
    if values.ndim == 1:
        values = values.reshape(-1, 1)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        if header is not None:
            writer.writerow(header)
        for row in values:
            writer.writerow([_format(v) for v in row])
    logger.debug(f"Wrote {path}")
    return path
