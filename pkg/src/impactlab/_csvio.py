"""Atomic, byte-stable CSV helpers shared by the dataset writers.

Floats are serialized with repr(), the shortest representation that
round-trips exactly, so identical data always produces identical bytes.
Writes go to a temporary file in the target directory followed by
os.replace, so readers never observe a partially written file.
"""

from __future__ import annotations

import csv
import hashlib
import os
import tempfile
from contextlib import contextmanager

import numpy as np


@contextmanager
def atomic_write(path):
    """Context manager yielding a text handle; the target file appears
    atomically on success and not at all on failure."""
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp", text=True)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def format_cell(value):
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_rows(path, header, rows):
    with atomic_write(path) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_cell(v) for v in row])


def write_columns(path, header, columns):
    columns = [np.asarray(c) if not isinstance(c, (list, tuple)) else c for c in columns]
    lengths = {len(c) for c in columns}
    if len(lengths) > 1:
        raise ValueError("columns differ in length")
    write_rows(path, header, zip(*columns))


def read_rows(path, expected_header=None):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        if expected_header is not None and header != list(expected_header):
            raise ValueError(
                f"{path}: expected header {list(expected_header)}, got {header}"
            )
        return header, [row for row in reader if row]


def read_numeric(path, expected_header=None):
    """Read a purely numeric CSV into a dict of float64 arrays by column."""
    header, rows = read_rows(path, expected_header)
    if rows:
        data = np.array([[float(v) for v in row] for row in rows])
    else:
        data = np.empty((0, len(header)))
    return {name: data[:, k] for k, name in enumerate(header)}


def sha256_file(path):
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()
