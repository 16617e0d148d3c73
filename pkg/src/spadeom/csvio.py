"""Minimal column-oriented CSV reading and writing.

Floats are written with ``repr`` so a write/read round trip is exact and
identical inputs give byte-identical files.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_columns(path, columns: dict, comments=()) -> None:
    names = list(columns)
    arrays = [np.asarray(columns[n]) for n in names]
    n = {len(a) for a in arrays}
    if len(n) > 1:
        raise ValueError(f"columns differ in length: {dict(zip(names, map(len, arrays)))}")
    with open(path, "w", newline="") as fh:
        for c in comments:
            fh.write(f"# {c}\n")
        fh.write(",".join(names) + "\n")
        for row in zip(*arrays):
            fh.write(",".join(format_value(v) for v in row) + "\n")


def read_columns(path, required=()) -> tuple[dict, list[str]]:
    """Read a CSV written by `write_columns`; returns (columns, comment lines).

    Raises ValueError naming the file and line on malformed input.
    """
    path = Path(path)
    comments, header, rows = [], None, []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        s = line.strip()
        if not s:
            continue
        if s.startswith("#"):
            comments.append(s[1:].strip())
            continue
        fields = [f.strip() for f in s.split(",")]
        if header is None:
            header = fields
            continue
        if len(fields) != len(header):
            raise ValueError(f"{path}:{lineno}: expected {len(header)} fields, got {len(fields)}")
        try:
            rows.append([float(f) for f in fields])
        except ValueError:
            raise ValueError(f"{path}:{lineno}: non-numeric field in {s!r}") from None
    if header is None:
        raise ValueError(f"{path}: no header row")
    missing = [r for r in required if r not in header]
    if missing:
        raise ValueError(f"{path}: missing columns {missing}; found {header}")
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    return {name: data[:, i] for i, name in enumerate(header)}, comments
