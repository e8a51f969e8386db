"""CSV and key=value files.

CSV files have a header row, comma separators, the time column first and
every number written with 17 significant digits so that a value survives a
write/read round trip bit for bit.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from ..errors import InvalidInputError

FLOAT_FMT = "{:.17g}"


def write_csv(path, header: Sequence[str], columns: Sequence[np.ndarray]) -> Path:
    path = Path(path)
    cols = [np.asarray(c, dtype=float).reshape(-1) for c in columns]
    if len(cols) != len(header):
        raise InvalidInputError("header and columns differ in length")
    n = cols[0].size if cols else 0
    if any(c.size != n for c in cols):
        raise InvalidInputError("columns differ in length")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            fh.write(",".join(header) + "\n")
            for row in zip(*cols):
                fh.write(",".join(FLOAT_FMT.format(v) for v in row) + "\n")
    except OSError as exc:
        raise InvalidInputError(f"cannot write {path}: {exc}") from None
    return path


def read_csv(path) -> tuple[list[str], np.ndarray]:
    """Header and a float array of shape ``(rows, columns)``.

    Parse failures name the file and line.
    """
    path = Path(path)
    try:
        fh = path.open(newline="")
    except OSError as exc:
        raise InvalidInputError(f"cannot read {path}: {exc}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise InvalidInputError(f"{path}: empty file") from None
        rows = []
        for row in reader:
            if not row:
                continue
            if len(row) != len(header):
                raise InvalidInputError(
                    f"{path}:{reader.line_num}: expected {len(header)} fields, got {len(row)}")
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise InvalidInputError(f"{path}:{reader.line_num}: {exc}") from None
    data = np.array(rows, dtype=float).reshape(-1, len(header))
    if header[0] != "time":
        raise InvalidInputError(f"{path}: first column must be 'time'")
    if data.shape[0] > 1 and np.any(np.diff(data[:, 0]) <= 0):
        raise InvalidInputError(f"{path}: times must be strictly increasing")
    return header, data


def write_report(path, items: Mapping[str, object]) -> Path:
    path = Path(path)
    lines = []
    for key, value in items.items():
        if isinstance(value, float):
            value = FLOAT_FMT.format(value)
        lines.append(f"{key}={value}")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")
    return path


def read_report(path) -> dict[str, str]:
    out = {}
    for line in Path(path).read_text().splitlines():
        if line.strip():
            key, _, value = line.partition("=")
            out[key.strip()] = value.strip()
    return out
