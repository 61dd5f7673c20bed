"""File formats used by the CLI and the benchmark harness.

Matrices and vectors travel as plain RFC-4180 CSV (one row per line,
``%.17g`` formatting, round-trip exact for doubles) or, for large arrays, as
a compact binary container:

    bytes 0-3   magic  b"GSMB"
    bytes 4-5   format version, little-endian uint16 (currently 1)
    bytes 6-7   reserved, zero
    bytes 8-15  number of rows, little-endian uint64
    bytes 16-23 number of columns, little-endian uint64 (1 for vectors)
    bytes 24-   row-major float64 payload, little-endian

Experiment configurations are plain-text ``key = value`` lines; ``#`` starts
a comment, blank lines are ignored, values keep their raw string form for
the caller to coerce against its schema.
"""

from __future__ import annotations

import csv
import io as _io
import struct

import numpy as np

from ..errors import ConfigError

__all__ = [
    "save_array_csv",
    "load_array_csv",
    "save_array_bin",
    "load_array_bin",
    "load_array",
    "as_vector_file",
    "parse_config_text",
    "load_config",
    "format_float",
    "write_csv_rows",
    "render_csv_rows",
]

_MAGIC = b"GSMB"
_VERSION = 1


def save_array_csv(path, arr):
    arr = np.atleast_2d(np.asarray(arr, dtype=np.float64))
    np.savetxt(path, arr, delimiter=",", fmt="%.17g")


def load_array_csv(path):
    arr = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    return arr


def save_array_bin(path, arr):
    arr = np.atleast_2d(np.ascontiguousarray(arr, dtype=np.float64))
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<HH", _VERSION, 0))
        fh.write(struct.pack("<QQ", arr.shape[0], arr.shape[1]))
        fh.write(arr.astype("<f8", copy=False).tobytes(order="C"))


def load_array_bin(path):
    with open(path, "rb") as fh:
        head = fh.read(24)
        if len(head) < 24 or head[:4] != _MAGIC:
            raise ConfigError(f"{path}: not a GSMB binary array")
        version, _ = struct.unpack("<HH", head[4:8])
        if version != _VERSION:
            raise ConfigError(f"{path}: unsupported GSMB version {version}")
        rows, cols = struct.unpack("<QQ", head[8:24])
        payload = fh.read(rows * cols * 8)
    if len(payload) != rows * cols * 8:
        raise ConfigError(f"{path}: truncated GSMB payload")
    return np.frombuffer(payload, dtype="<f8").reshape(rows, cols).copy()


def load_array(path):
    """Load a matrix/vector, sniffing the binary magic, else CSV."""
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == _MAGIC:
        return load_array_bin(path)
    try:
        return load_array_csv(path)
    except ValueError as exc:
        raise ConfigError(f"{path}: cannot parse as CSV ({exc})") from exc


def as_vector_file(path):
    arr = load_array(path)
    if arr.ndim == 2 and min(arr.shape) > 1:
        raise ConfigError(f"{path}: expected a vector, got shape {arr.shape}")
    return arr.ravel()


def parse_config_text(text):
    """Parse ``key = value`` lines into an ordered dict of raw strings."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"config line {lineno}: empty key")
        out[key] = value.strip()
    return out


def load_config(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read())


def format_float(x):
    """Shortest round-trip decimal form (deterministic for float64)."""
    return repr(float(x))


def write_csv_rows(path, header, rows):
    """RFC-4180 CSV writer with deterministic float formatting."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(
                [format_float(v) if isinstance(v, float) else v for v in row]
            )


def render_csv_rows(header, rows):
    """Same as write_csv_rows but returning the text."""
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_float(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()
