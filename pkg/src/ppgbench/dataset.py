"""On-disk formats and loaders: manifest CSV, PPGS/PPGE binary stores,
external prediction CSVs, segment subsampling, and cohort assembly.

Formats (all little-endian):
  PPGS v1: "PPGS" | u32 version=1 | f32 fs_hz | u32 n_segments |
           u32 segment_length | n_segments*segment_length f32, segment-major
  PPGE v1: "PPGE" | u32 version=1 | u32 n_segments | u32 dim |
           n_segments*dim f32, vector-major
  Manifest CSV header:
    subject_id,age_years,sex,height_cm,weight_kg,bmi_kg_m2,sbp_mmhg,dbp_mmhg,segment_file
  External predictions CSV header: subject_id,segment_index,predicted_age_years
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FlatSegmentError, FormatError, InvalidSegmentError
from .features import hrv_features, peaks_to_ibis
from .signal import PpgSegment, detect_systolic_peaks, zscore

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

# Demographic regression features, in manifest order of the covariates.
DEMOG_NAMES = ("sex", "bmi_kg_m2", "height_cm", "weight_kg", "sbp_mmhg", "dbp_mmhg")

MIN_ADULT_AGE = 18.0
DEFAULT_MAX_SEGMENTS = 50

_PPGS_MAGIC = b"PPGS"
_PPGE_MAGIC = b"PPGE"
_VERSION = 1


@dataclass(frozen=True)
class SubjectRecord:
    subject_id: str
    age_years: float
    sex: str  # "M" or "F"
    height_cm: float
    weight_kg: float
    bmi_kg_m2: float
    sbp_mmhg: float
    dbp_mmhg: float
    segment_file: str = ""

    def demographics(self) -> np.ndarray:
        """Regression covariates; sex encoded M=1.0, F=0.0."""
        return np.array(
            [
                1.0 if self.sex == "M" else 0.0,
                self.bmi_kg_m2,
                self.height_cm,
                self.weight_kg,
                self.sbp_mmhg,
                self.dbp_mmhg,
            ]
        )


@dataclass(frozen=True)
class SegmentStore:
    subject_id: str
    fs_hz: float
    segments: np.ndarray  # (n_segments, segment_length) float32

    def __post_init__(self):
        seg = np.asarray(self.segments, dtype=np.float32)
        object.__setattr__(self, "segments", seg)
        if seg.ndim != 2 or seg.shape[0] < 1:
            raise ValueError("store needs at least one segment")


@dataclass(frozen=True)
class EmbeddingStore:
    subject_id: str
    model_name: str
    dim: int
    vectors: np.ndarray  # (n_segments, dim) float32

    def __post_init__(self):
        vec = np.asarray(self.vectors, dtype=np.float32)
        object.__setattr__(self, "vectors", vec)
        if vec.ndim != 2 or vec.shape[1] != self.dim or self.dim < 1:
            raise ValueError("vectors must be (n_segments, dim) with dim >= 1")


def load_manifest(path) -> tuple[list[SubjectRecord], int]:
    """Parse a manifest CSV.

    Returns (records, n_excluded_minors).  Rows with age < 18 are excluded
    and counted; any missing or non-finite field is a hard error naming the
    row; subject ids must be unique.
    """
    path = Path(path)
    records: list[SubjectRecord] = []
    seen: set[str] = set()
    excluded = 0
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in MANIFEST_COLUMNS if c not in header]
        if missing:
            raise FormatError(f"manifest missing columns: {', '.join(missing)}")
        for lineno, row in enumerate(reader, start=2):
            sid = (row.get("subject_id") or "").strip()
            if not sid:
                raise FormatError(f"manifest row {lineno}: empty subject_id")
            if sid in seen:
                raise FormatError(f"manifest row {lineno}: duplicate subject_id {sid!r}")
            sex = (row.get("sex") or "").strip()
            if sex not in ("M", "F"):
                raise FormatError(f"manifest row {lineno} ({sid}): bad sex {sex!r}")
            values = {}
            for col in ("age_years", "height_cm", "weight_kg", "bmi_kg_m2", "sbp_mmhg", "dbp_mmhg"):
                cell = (row.get(col) or "").strip()
                if not cell:
                    raise FormatError(f"manifest row {lineno} ({sid}): empty {col}")
                try:
                    v = float(cell)
                except ValueError:
                    raise FormatError(f"manifest row {lineno} ({sid}): bad {col} {cell!r}")
                if not math.isfinite(v) or (col != "age_years" and v <= 0):
                    raise FormatError(f"manifest row {lineno} ({sid}): invalid {col} {cell!r}")
                values[col] = v
            seen.add(sid)
            if values["age_years"] < MIN_ADULT_AGE:
                excluded += 1
                continue
            records.append(
                SubjectRecord(
                    subject_id=sid,
                    age_years=values["age_years"],
                    sex=sex,
                    height_cm=values["height_cm"],
                    weight_kg=values["weight_kg"],
                    bmi_kg_m2=values["bmi_kg_m2"],
                    sbp_mmhg=values["sbp_mmhg"],
                    dbp_mmhg=values["dbp_mmhg"],
                    segment_file=(row.get("segment_file") or "").strip(),
                )
            )
    return records, excluded


def write_manifest(records: list[SubjectRecord], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_COLUMNS)
        for r in records:
            writer.writerow(
                [
                    r.subject_id,
                    repr(float(r.age_years)),
                    r.sex,
                    repr(float(r.height_cm)),
                    repr(float(r.weight_kg)),
                    repr(float(r.bmi_kg_m2)),
                    repr(float(r.sbp_mmhg)),
                    repr(float(r.dbp_mmhg)),
                    r.segment_file,
                ]
            )


def select_even_indices(n_available: int, k_max: int = DEFAULT_MAX_SEGMENTS) -> list[int]:
    """Evenly spaced segment indices, at most k_max of them."""
    if n_available < 1:
        raise ValueError("n_available must be positive")
    if n_available <= k_max:
        return list(range(n_available))
    return [(i * n_available) // k_max for i in range(k_max)]


def write_segment_store(store: SegmentStore, path) -> None:
    n_segments, segment_length = store.segments.shape
    with open(path, "wb") as fh:
        fh.write(_PPGS_MAGIC)
        fh.write(struct.pack("<IfII", _VERSION, store.fs_hz, n_segments, segment_length))
        fh.write(np.ascontiguousarray(store.segments, dtype="<f4").tobytes())


def read_segment_store(path) -> SegmentStore:
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < 20 or raw[:4] != _PPGS_MAGIC:
        raise FormatError(f"{path.name}: bad PPGS magic")
    version, fs_hz, n_segments, segment_length = struct.unpack("<IfII", raw[4:20])
    if version != _VERSION:
        raise FormatError(f"{path.name}: unsupported PPGS version {version}")
    expected = 20 + 4 * n_segments * segment_length
    if len(raw) != expected:
        raise FormatError(
            f"{path.name}: payload length {len(raw)} != header-declared {expected}"
        )
    samples = np.frombuffer(raw[20:], dtype="<f4").reshape(n_segments, segment_length)
    return SegmentStore(subject_id=path.name.split(".")[0], fs_hz=fs_hz, segments=samples)


def write_embedding_store(store: EmbeddingStore, path) -> None:
    n_segments = store.vectors.shape[0]
    with open(path, "wb") as fh:
        fh.write(_PPGE_MAGIC)
        fh.write(struct.pack("<III", _VERSION, n_segments, store.dim))
        fh.write(np.ascontiguousarray(store.vectors, dtype="<f4").tobytes())


def read_embedding_store(path) -> EmbeddingStore:
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < 16 or raw[:4] != _PPGE_MAGIC:
        raise FormatError(f"{path.name}: bad PPGE magic")
    version, n_segments, dim = struct.unpack("<III", raw[4:16])
    if version != _VERSION:
        raise FormatError(f"{path.name}: unsupported PPGE version {version}")
    if dim == 0:
        raise FormatError(f"{path.name}: zero embedding dimension")
    expected = 16 + 4 * n_segments * dim
    if len(raw) != expected:
        raise FormatError(
            f"{path.name}: payload length {len(raw)} != header-declared {expected}"
        )
    vectors = np.frombuffer(raw[16:], dtype="<f4").reshape(n_segments, dim)
    parts = path.name.split(".")
    model_name = parts[1] if len(parts) >= 3 else ""
    return EmbeddingStore(
        subject_id=parts[0], model_name=model_name, dim=dim, vectors=vectors
    )


def load_external_predictions(path) -> dict[str, list[float]]:
    """Per-subject external age predictions, ordered by segment index."""
    rows: dict[str, dict[int, float]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in ("subject_id", "segment_index", "predicted_age_years"):
            if col not in header:
                raise FormatError(f"predictions CSV missing column {col!r}")
        for lineno, row in enumerate(reader, start=2):
            sid = row["subject_id"].strip()
            try:
                seg_idx = int(row["segment_index"])
                pred = float(row["predicted_age_years"])
            except ValueError:
                raise FormatError(f"predictions row {lineno}: malformed values")
            if not math.isfinite(pred):
                raise FormatError(f"predictions row {lineno}: non-finite prediction")
            per_subject = rows.setdefault(sid, {})
            if seg_idx in per_subject:
                raise FormatError(
                    f"predictions row {lineno}: duplicate ({sid}, {seg_idx})"
                )
            per_subject[seg_idx] = pred
    return {
        sid: [preds[k] for k in sorted(preds)] for sid, preds in rows.items()
    }


# ---------------------------------------------------------------------------
# Cohort assembly: manifest + stores -> per-segment features ready for CV.
# ---------------------------------------------------------------------------


@dataclass
class SubjectData:
    """Everything the evaluation layer needs for one subject."""

    record: SubjectRecord
    n_selected: int
    hrv_rows: np.ndarray  # (n_valid, 7)
    hrv_segment_indices: list[int]  # positions among the selected segments
    n_dropped: int
    embeddings: dict[str, np.ndarray] = field(default_factory=dict)


@dataclass
class Cohort:
    subjects: list[SubjectData]
    n_minors_excluded: int = 0

    def by_id(self) -> dict[str, SubjectData]:
        return {s.record.subject_id: s for s in self.subjects}

    @property
    def total_dropped_segments(self) -> int:
        return sum(s.n_dropped for s in self.subjects)


def extract_segment_features(store: SegmentStore, selected: list[int]):
    """Per-segment HR/HRV rows for the selected segments of one store.

    Returns (rows, valid_positions, n_dropped); positions index into the
    selected list, not the raw store.
    """
    rows = []
    valid_positions = []
    dropped = 0
    for pos, seg_idx in enumerate(selected):
        seg = PpgSegment(samples=store.segments[seg_idx].astype(np.float64), fs_hz=store.fs_hz)
        try:
            normalized = zscore(seg)
            peaks = detect_systolic_peaks(normalized)
            ibis = peaks_to_ibis(peaks, store.fs_hz)
            feats = hrv_features(ibis, n_peaks=len(peaks))
        except (FlatSegmentError, InvalidSegmentError):
            dropped += 1
            continue
        rows.append(feats.as_vector())
        valid_positions.append(pos)
    matrix = np.stack(rows) if rows else np.empty((0, 7))
    return matrix, valid_positions, dropped


def load_cohort(
    data_dir,
    max_segments: int = DEFAULT_MAX_SEGMENTS,
    embedding_models: list[str] | None = None,
) -> Cohort:
    """Load a data directory (manifest.csv + per-subject stores) into memory.

    Embedding stores are validated to align 1:1 with the selected segments.
    """
    data_dir = Path(data_dir)
    records, excluded = load_manifest(data_dir / "manifest.csv")
    subjects = []
    for rec in records:
        store_path = data_dir / (rec.segment_file or f"{rec.subject_id}.ppgs")
        store = read_segment_store(store_path)
        selected = select_even_indices(store.segments.shape[0], max_segments)
        hrv_rows, valid_positions, dropped = extract_segment_features(store, selected)
        embeddings = {}
        for model in embedding_models or []:
            emb_path = data_dir / f"{rec.subject_id}.{model}.ppge"
            emb = read_embedding_store(emb_path)
            if emb.vectors.shape[0] != len(selected):
                raise FormatError(
                    f"{emb_path.name}: {emb.vectors.shape[0]} vectors for "
                    f"{len(selected)} selected segments"
                )
            embeddings[model] = emb.vectors.astype(np.float64)
        subjects.append(
            SubjectData(
                record=rec,
                n_selected=len(selected),
                hrv_rows=hrv_rows,
                hrv_segment_indices=valid_positions,
                n_dropped=dropped,
                embeddings=embeddings,
            )
        )
    return Cohort(subjects=subjects, n_minors_excluded=excluded)
