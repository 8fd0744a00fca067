"""Readers and writers for the benchmark's on-disk formats.

Independent implementation of the PPGS/PPGE binary codecs and the
manifest CSV; byte-compatible with the benchmark toolkit's own readers
and writers.  All files are little-endian; writes go through a temp file
and an atomic rename.
"""

from __future__ import annotations

import csv
import os
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

PPGS_MAGIC = b"PPGS"
PPGE_MAGIC = b"PPGE"
VERSION = 1

MANIFEST_COLUMNS = (
    "subject_id",
    "age_years",
    "sex",
    "height_cm",
    "weight_kg",
    "bmi_kg_m2",
    "sbp_mmhg",
    "dbp_mmhg",
    "segment_file",
)


class BridgeFormatError(Exception):
    pass


@dataclass(frozen=True)
class PpgsFile:
    fs_hz: float
    segments: np.ndarray  # (n_segments, segment_length) float32


def atomic_write_bytes(path, payload: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_ppgs(path, fs_hz: float, segments: np.ndarray) -> None:
    segments = np.ascontiguousarray(segments, dtype="<f4")
    if segments.ndim != 2:
        raise ValueError("segments must be 2-D")
    header = PPGS_MAGIC + struct.pack(
        "<IfII", VERSION, fs_hz, segments.shape[0], segments.shape[1]
    )
    atomic_write_bytes(path, header + segments.tobytes())


def read_ppgs(path) -> PpgsFile:
    raw = Path(path).read_bytes()
    if len(raw) < 20 or raw[:4] != PPGS_MAGIC:
        raise BridgeFormatError(f"{Path(path).name}: not a PPGS file")
    version, fs_hz, n_segments, segment_length = struct.unpack("<IfII", raw[4:20])
    if version != VERSION:
        raise BridgeFormatError(f"{Path(path).name}: PPGS version {version}")
    expected = 20 + 4 * n_segments * segment_length
    if len(raw) != expected:
        raise BridgeFormatError(f"{Path(path).name}: truncated payload")
    segments = np.frombuffer(raw[20:], dtype="<f4").reshape(n_segments, segment_length)
    return PpgsFile(fs_hz=fs_hz, segments=segments)


def write_ppge(path, vectors: np.ndarray) -> None:
    vectors = np.ascontiguousarray(vectors, dtype="<f4")
    if vectors.ndim != 2 or vectors.shape[1] < 1:
        raise ValueError("vectors must be (n_segments, dim) with dim >= 1")
    header = PPGE_MAGIC + struct.pack("<III", VERSION, vectors.shape[0], vectors.shape[1])
    atomic_write_bytes(path, header + vectors.tobytes())


def read_ppge(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < 16 or raw[:4] != PPGE_MAGIC:
        raise BridgeFormatError(f"{Path(path).name}: not a PPGE file")
    version, n_segments, dim = struct.unpack("<III", raw[4:16])
    if version != VERSION:
        raise BridgeFormatError(f"{Path(path).name}: PPGE version {version}")
    if len(raw) != 16 + 4 * n_segments * dim:
        raise BridgeFormatError(f"{Path(path).name}: truncated payload")
    return np.frombuffer(raw[16:], dtype="<f4").reshape(n_segments, dim)


def write_manifest(rows: list[dict], path) -> None:
    """Write subject rows (keyed by MANIFEST_COLUMNS) atomically."""
    import io

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(MANIFEST_COLUMNS)
    for row in rows:
        writer.writerow([row[c] for c in MANIFEST_COLUMNS])
    atomic_write_bytes(path, buf.getvalue().encode("utf-8"))
