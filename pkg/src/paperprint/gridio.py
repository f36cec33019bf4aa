"""Binary grid file format and config digests.

A grid file carries one float64 matrix plus a small UTF-8 metadata block:

    offset  size  field
    0       4     magic "PGRD"
    4       2     format version, little-endian u16 (currently 1)
    6       1     dtype code (1 = float64 little-endian)
    7       1     reserved (0)
    8       4     rows, little-endian u32
    12      4     cols, little-endian u32
    16      4     metadata length in bytes, little-endian u32
    20      var   metadata: "key=value" lines joined by \\n, keys sorted
    ...     var   payload: rows*cols float64 values, row-major

Writers embed a payload checksum under the ``payload_sha256`` key; readers
verify it by default, so a single corrupted byte is detected.  Pipeline
stages chain through ``config_digest`` metadata entries computed from a
canonical JSON serialization of the run configuration.
"""

from __future__ import annotations

import hashlib
import json
import re
import struct
from pathlib import Path

import numpy as np

MAGIC = b"PGRD"
VERSION = 1
DTYPE_F64 = 1
_HEADER = struct.Struct("<4sHBBIII")
_KEY_RE = re.compile(r"^[A-Za-z0-9_.\-]+$")


class GridFileError(ValueError):
    """Malformed, truncated, or corrupted grid file."""


def canonical_digest(config: dict) -> str:
    """SHA-256 of the canonical JSON serialization of a configuration."""
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _encode_metadata(metadata: dict[str, str]) -> bytes:
    lines = []
    for key in sorted(metadata):
        value = str(metadata[key])
        if not _KEY_RE.match(key):
            raise ValueError(f"invalid metadata key {key!r}")
        if "\n" in value:
            raise ValueError(f"metadata value for {key!r} must be single-line")
        lines.append(f"{key}={value}")
    return "\n".join(lines).encode("utf-8")


def _decode_metadata(blob: bytes) -> dict[str, str]:
    if not blob:
        return {}
    meta = {}
    for line in blob.decode("utf-8").split("\n"):
        key, sep, value = line.partition("=")
        if not sep:
            raise GridFileError(f"malformed metadata line {line!r}")
        meta[key] = value
    return meta


def write_grid(path, grid: np.ndarray, metadata: dict[str, str] | None = None) -> None:
    """Write a 2-D float64 grid; adds a payload checksum to the metadata."""
    grid = np.ascontiguousarray(grid, dtype="<f8")
    if grid.ndim != 2:
        raise ValueError("grid must be 2-D")
    payload = grid.tobytes(order="C")
    meta = dict(metadata or {})
    meta["payload_sha256"] = hashlib.sha256(payload).hexdigest()
    meta_blob = _encode_metadata(meta)
    header = _HEADER.pack(
        MAGIC, VERSION, DTYPE_F64, 0, grid.shape[0], grid.shape[1], len(meta_blob)
    )
    Path(path).write_bytes(header + meta_blob + payload)


def read_grid(path, verify: bool = True) -> tuple[np.ndarray, dict[str, str]]:
    """Read a grid file back into (array, metadata).

    With ``verify`` the payload checksum recorded at write time is checked.
    """
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise GridFileError("file too short for a grid header")
    magic, version, dtype, _, rows, cols, meta_len = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise GridFileError(f"bad magic {magic!r}")
    if version != VERSION:
        raise GridFileError(f"unsupported version {version}")
    if dtype != DTYPE_F64:
        raise GridFileError(f"unsupported dtype code {dtype}")
    meta_end = _HEADER.size + meta_len
    payload_len = rows * cols * 8
    if len(raw) != meta_end + payload_len:
        raise GridFileError(
            f"size mismatch: expected {meta_end + payload_len} bytes, have {len(raw)}"
        )
    meta = _decode_metadata(raw[_HEADER.size : meta_end])
    payload = raw[meta_end:]
    if verify and "payload_sha256" in meta:
        if hashlib.sha256(payload).hexdigest() != meta["payload_sha256"]:
            raise GridFileError("payload checksum mismatch")
    grid = np.frombuffer(payload, dtype="<f8").reshape(rows, cols).copy()
    return grid, meta


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
