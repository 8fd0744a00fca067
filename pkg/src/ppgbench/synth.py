"""Deterministic synthetic PPG population generator.

Beats are rendered as a primary Gaussian pulse plus a smaller, delayed
Gaussian (the dicrotic wave) on the sample grid, so planted systolic peak
locations are exact ground truth.  Noise is a band-limited Gaussian process
(white noise smoothed by a Gaussian kernel, then rescaled), mimicking the
low-frequency baseline wander of filtered pulse-oximeter output rather than
broadband sensor noise.

All randomness flows from one 64-bit seed; per-subject streams are derived
by mixing the subject ordinal into the seed, so generation is deterministic
regardless of scheduling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import (
    EmbeddingStore,
    SegmentStore,
    SubjectRecord,
    write_embedding_store,
    write_manifest,
    write_segment_store,
)
from .rng import Xoshiro256StarStar, mix_seed

# Generated IBIs are clipped to a sub-range of the 0.3--2.0 s validity
# window so every clean segment passes the downstream rules with margin.
# renderer bound: ibi 0.4 s (HR 150) keeps consecutive peaks exactly at
# the detector's minimum-distance window of 0.4 s
IBI_RENDER_MIN_S = 0.4
# population bound: a small margin above the renderer bound so detected
# peak spacing survives thinning even with sub-sample jitter
IBI_CLIP_LO_S = 0.42
IBI_CLIP_HI_S = 1.9

SYNTH_EMBEDDING_MODEL = "synth"


@dataclass(frozen=True)
class Morphology:
    """Per-beat shape parameters."""

    pulse_amplitude: float = 1.0
    pulse_width_frac: float = 0.09  # Gaussian sigma as a fraction of the IBI
    dicrotic_amplitude: float = 0.25
    dicrotic_delay_frac: float = 0.35
    dicrotic_delay_max_s: float = 0.38  # keep the dicrotic inside the thinning window
    dicrotic_width_frac: float = 0.12
    dicrotic_width_max_s: float = 0.12


@dataclass(frozen=True)
class SynthSpec:
    n_subjects: int = 200
    seed: int = 7
    age_min: float = 20.0
    age_max: float = 90.0
    # aging model: mean IBI and dicrotic amplitude affine in age
    ibi_base_s: float = 0.55
    ibi_age_slope: float = 0.005
    ibi_subject_sd: float = 0.08
    ibi_jitter_sd: float = 0.02
    dicrotic_base: float = 0.12
    dicrotic_age_slope: float = 0.002
    noise_sd: float = 0.05
    noise_smooth_s: float = 1.5
    fs_hz: float = 125.0
    segment_len: int = 1250
    segments_per_subject: int = 8
    embedding_dim: int = 16
    embedding_age_noise_sd: float = 7.0


def _smooth_gaussian_noise(
    n: int, sd: float, smooth_s: float, fs_hz: float, rng: Xoshiro256StarStar
) -> np.ndarray:
    """Band-limited Gaussian noise with the requested pointwise SD."""
    if sd == 0.0:
        return np.zeros(n)
    white = np.array(rng.normals(n))
    sigma = smooth_s * fs_hz
    if sigma <= 0:
        return sd * white
    radius = int(math.ceil(4 * sigma))
    kernel = np.exp(-0.5 * (np.arange(-radius, radius + 1) / sigma) ** 2)
    kernel /= kernel.sum()
    padded = np.pad(white, radius, mode="wrap")
    smoothed = np.convolve(padded, kernel, mode="valid")
    scale = float(np.std(smoothed))
    if scale == 0.0:
        return np.zeros(n)
    return sd * smoothed / scale


def synth_segment(
    ibi_sequence,
    morphology: Morphology,
    fs_hz: float,
    noise_sd: float,
    rng: Xoshiro256StarStar,
    segment_len: int = 1250,
    noise_smooth_s: float = 1.5,
) -> tuple[np.ndarray, list[int]]:
    """Render one segment; returns (samples, planted systolic peak indices).

    Peaks are placed exactly on grid samples.  Planted peaks closer than two
    samples to either edge are not reported as ground truth (they are not
    interior maxima).
    """
    ibis = [float(v) for v in ibi_sequence]
    if any(v < IBI_RENDER_MIN_S or v > IBI_CLIP_HI_S for v in ibis):
        raise ValueError("IBI outside the generator clip range")
    t = np.arange(segment_len) / fs_hz
    x = np.zeros(segment_len)
    planted: list[int] = []
    # first peak index: half a beat in
    pos = int(round(0.5 * ibis[0] * fs_hz))
    beat = 0
    while pos < segment_len and beat < len(ibis):
        ibi = ibis[beat]
        center = pos / fs_hz
        sigma_p = morphology.pulse_width_frac * ibi
        x += morphology.pulse_amplitude * np.exp(-0.5 * ((t - center) / sigma_p) ** 2)
        if morphology.dicrotic_amplitude > 0:
            delay = min(
                morphology.dicrotic_delay_frac * ibi, morphology.dicrotic_delay_max_s
            )
            sigma_d = min(
                morphology.dicrotic_width_frac * ibi, morphology.dicrotic_width_max_s
            )
            x += morphology.dicrotic_amplitude * np.exp(
                -0.5 * ((t - center - delay) / sigma_d) ** 2
            )
        if 2 <= pos <= segment_len - 3:
            planted.append(pos)
        pos += int(round(ibi * fs_hz))
        beat += 1
    x += _smooth_gaussian_noise(segment_len, noise_sd, noise_smooth_s, fs_hz, rng)
    return x, planted


def _subject_ibis(mean_ibi: float, jitter_sd: float, n: int, rng: Xoshiro256StarStar):
    return [
        min(max(mean_ibi + jitter_sd * rng.normal(), IBI_CLIP_LO_S), IBI_CLIP_HI_S)
        for _ in range(n)
    ]


def generate_subject(spec: SynthSpec, ordinal: int):
    """One subject: record, segment store, embedding vectors, planted peaks."""
    rng = Xoshiro256StarStar(mix_seed(spec.seed, ordinal))
    sid = f"S{ordinal:04d}"
    age = rng.uniform_range(spec.age_min, spec.age_max)
    sex = "M" if rng.uniform() < 0.5 else "F"
    # planted age dependence for height/weight/SBP/DBP; BMI pure noise
    height = 176.0 - 0.12 * (age - 50.0) + 5.0 * rng.normal() - (6.0 if sex == "F" else 0.0)
    bmi = 24.0 + 2.5 * rng.normal()
    weight = bmi * (height / 100.0) ** 2 + 2.0 * rng.normal()
    sbp = 108.0 + 0.45 * age + 6.0 * rng.normal()
    dbp = 88.0 - 0.18 * age + 5.0 * rng.normal()
    bmi = max(bmi, 14.0)
    weight = max(weight, 35.0)
    sbp = max(sbp, 70.0)
    dbp = max(dbp, 35.0)
    mean_ibi = spec.ibi_base_s + spec.ibi_age_slope * age + spec.ibi_subject_sd * rng.normal()
    mean_ibi = min(max(mean_ibi, IBI_CLIP_LO_S), IBI_CLIP_HI_S)
    dicrotic_amp = max(spec.dicrotic_base + spec.dicrotic_age_slope * age, 0.0)
    morphology = Morphology(dicrotic_amplitude=dicrotic_amp)

    segments = []
    planted_all = []
    duration_s = spec.segment_len / spec.fs_hz
    for _ in range(spec.segments_per_subject):
        n_beats = int(duration_s / IBI_CLIP_LO_S) + 3
        ibis = _subject_ibis(mean_ibi, spec.ibi_jitter_sd, n_beats, rng)
        samples, planted = synth_segment(
            ibis,
            morphology,
            spec.fs_hz,
            spec.noise_sd,
            rng,
            segment_len=spec.segment_len,
            noise_smooth_s=spec.noise_smooth_s,
        )
        segments.append(samples.astype(np.float32))
        planted_all.append(planted)

    # synthetic embeddings: coordinate 0 carries a noisy age signal, the
    # rest is noise, so ppg configs are learnable and fusion helps
    vectors = np.zeros((spec.segments_per_subject, spec.embedding_dim), dtype=np.float32)
    for i in range(spec.segments_per_subject):
        vectors[i, 0] = age + spec.embedding_age_noise_sd * rng.normal()
        for j in range(1, spec.embedding_dim):
            vectors[i, j] = rng.normal()

    record = SubjectRecord(
        subject_id=sid,
        age_years=age,
        sex=sex,
        height_cm=height,
        weight_kg=weight,
        bmi_kg_m2=bmi,
        sbp_mmhg=sbp,
        dbp_mmhg=dbp,
        segment_file=f"{sid}.ppgs",
    )
    store = SegmentStore(subject_id=sid, fs_hz=spec.fs_hz, segments=np.stack(segments))
    embeddings = EmbeddingStore(
        subject_id=sid,
        model_name=SYNTH_EMBEDDING_MODEL,
        dim=spec.embedding_dim,
        vectors=vectors,
    )
    return record, store, embeddings, planted_all


def synth_population(spec: SynthSpec, out_dir) -> list[SubjectRecord]:
    """Generate and write a full population through the dataset writers."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = []
    for ordinal in range(spec.n_subjects):
        record, store, embeddings, _ = generate_subject(spec, ordinal)
        write_segment_store(store, out_dir / f"{record.subject_id}.ppgs")
        write_embedding_store(
            embeddings, out_dir / f"{record.subject_id}.{SYNTH_EMBEDDING_MODEL}.ppge"
        )
        records.append(record)
    write_manifest(records, out_dir / "manifest.csv")
    return records
