"""File formats: CSV matrices, deterministic JSON and atomic writes.

Matrices and vectors are stored as headerless CSV with one row per line and
``.`` as the decimal mark.  JSON reports use the shortest round-trip
representation of every float (Python's ``repr``); non-finite values are
written as the strings ``"inf"``, ``"-inf"`` and ``"nan"`` so the files stay
valid JSON.  All writers go through a temporary file in the target directory
followed by :func:`os.replace`, so an interrupted run never leaves a
truncated file behind.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


def atomic_write_text(path, text: str) -> None:
    """Write ``text`` to ``path`` via a temporary file and a rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def format_float(v) -> str:
    """Shortest round-trip decimal form of ``v``."""
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(v)


def read_matrix_csv(path) -> np.ndarray:
    """Read a headerless numeric CSV into a 2-D float array.

    Raises ``ValueError`` for ragged rows, empty files or non-numeric cells.
    """
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            cells = [c.strip() for c in row]
            if not any(cells):
                continue
            try:
                rows.append([float(c) for c in cells])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: non-numeric entry") from exc
    if not rows:
        raise ValueError(f"{path}: no data")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ValueError(f"{path}: rows have different lengths")
    M = np.asarray(rows, dtype=float)
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{path}: entries must be finite")
    return M


def read_vector_csv(path) -> np.ndarray:
    """Read a vector stored either as one column or as one row."""
    M = read_matrix_csv(path)
    if M.shape[1] == 1 or M.shape[0] == 1:
        return M.ravel()
    raise ValueError(f"{path}: expected a single row or column, got shape {M.shape}")


def matrix_to_csv(M) -> str:
    M = np.asarray(M, dtype=float)
    if M.ndim == 1:
        M = M[:, None]
    return "".join(",".join(format_float(v) for v in row) + "\n" for row in M)


def write_matrix_csv(path, M) -> None:
    atomic_write_text(path, matrix_to_csv(M))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else format_float(v)
    return obj


def dumps_json(obj) -> str:
    """Deterministic JSON text: sorted keys, shortest floats, trailing newline."""
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(path, obj) -> None:
    atomic_write_text(path, dumps_json(obj))


def table_to_csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    """CSV text with a header row; floats use :func:`format_float`, ``None``
    becomes an empty cell and booleans are written as ``true``/``false``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format_float(v)
    return str(v)


def write_table_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    atomic_write_text(path, table_to_csv(header, rows))


def read_table_csv(path) -> list[dict]:
    """Rows of a headed CSV as dictionaries of strings."""
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
