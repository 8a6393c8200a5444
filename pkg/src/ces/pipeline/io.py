"""File I/O for pipeline artifacts: CSV tables and atomic JSON documents.

CSV files follow RFC 4180 with a fixed header row. Floats are serialized with
`repr`, the shortest representation that parses back to the identical double,
so written tables reload bit-exactly.
"""

import csv
import json
import os
import tempfile

import numpy as np


def _format_cell(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    return str(value)


def atomic_write_text(path, text: str) -> None:
    """Write via a temporary file and rename, so readers never see partial output."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, header: list[str], rows) -> None:
    import io as _io
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_format_cell(v) for v in row])
    atomic_write_text(path, buf.getvalue())


def read_csv(path):
    """Returns (header, rows) with cells kept as strings."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, [row for row in reader]


def read_csv_floats(path):
    """Returns (header, float array) for purely numeric tables."""
    header, rows = read_csv(path)
    return header, np.array([[float(c) for c in row] for row in rows])


def write_json(path, payload) -> None:
    atomic_write_text(path, json.dumps(payload, indent=2, default=_jsonable) + "\n")


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)
