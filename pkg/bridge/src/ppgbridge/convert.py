"""PulseDB subject-file conversion into the manifest + PPGS layout.

Each source file is an HDF5 container with one group per subject holding:

- ``ppg``: (n_segments, segment_length) float waveform matrix;
- ``fs``: scalar sampling rate in Hz;
- scalars ``age``, ``height``, ``weight``, ``bmi``, ``sbp``, ``dbp``;
- ``sex``: scalar, 1 for male / 0 for female (or a byte string "M"/"F").

Unreadable or structurally broken files (including dangling object
references, a known failure mode of the source distribution) are skipped
and counted, never repaired.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import h5py
import numpy as np

from .formats import write_manifest, write_ppgs


@dataclass(frozen=True)
class ConversionResult:
    n_converted: int
    n_skipped: int
    skipped_files: tuple[str, ...]


def _scalar(group, key) -> float:
    value = np.asarray(group[key])
    return float(value.reshape(-1)[0])


def _sex(group) -> str:
    raw = np.asarray(group["sex"]).reshape(-1)[0]
    if isinstance(raw, bytes):
        text = raw.decode("ascii", errors="replace").upper()
        if text in ("M", "F"):
            return text
        raise ValueError(f"unrecognized sex value {raw!r}")
    return "M" if float(raw) >= 0.5 else "F"


def _read_subject(path: Path) -> tuple[dict, float, np.ndarray]:
    with h5py.File(path, "r") as fh:
        keys = list(fh.keys())
        if len(keys) != 1:
            raise ValueError(f"expected one subject group, found {len(keys)}")
        group = fh[keys[0]]
        ppg = np.asarray(group["ppg"], dtype=np.float32)
        if ppg.ndim != 2 or ppg.shape[0] < 1:
            raise ValueError("ppg matrix must be (n_segments, segment_length)")
        if not np.all(np.isfinite(ppg)):
            raise ValueError("non-finite waveform samples")
        fs = _scalar(group, "fs")
        row = {
            "subject_id": keys[0],
            "age_years": repr(_scalar(group, "age")),
            "sex": _sex(group),
            "height_cm": repr(_scalar(group, "height")),
            "weight_kg": repr(_scalar(group, "weight")),
            "bmi_kg_m2": repr(_scalar(group, "bmi")),
            "sbp_mmhg": repr(_scalar(group, "sbp")),
            "dbp_mmhg": repr(_scalar(group, "dbp")),
            "segment_file": f"{keys[0]}.ppgs",
        }
    return row, fs, ppg


def convert_pulsedb(source_dir, out_dir) -> ConversionResult:
    """Convert every HDF5 file under source_dir; skip and count failures."""
    source_dir = Path(source_dir)
    out_dir = Path(out_dir)
    if not source_dir.is_dir():
        raise NotADirectoryError(f"source directory not found: {source_dir}")
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    skipped: list[str] = []
    files = sorted(
        p for p in source_dir.iterdir() if p.suffix.lower() in (".mat", ".h5", ".hdf5")
    )
    for path in files:
        try:
            row, fs, ppg = _read_subject(path)
        except (OSError, KeyError, ValueError, IndexError):
            skipped.append(path.name)
            continue
        write_ppgs(out_dir / row["segment_file"], fs, ppg)
        rows.append(row)
    write_manifest(rows, out_dir / "manifest.csv")
    return ConversionResult(
        n_converted=len(rows), n_skipped=len(skipped), skipped_files=tuple(skipped)
    )
