"""Waveform-level primitives: Fourier resampling, per-segment normalization,
prominence-based systolic peak detection, and averaged beat templates.

All functions are pure; segments are treated as immutable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FlatSegmentError, NoValidBeatsError

TEMPLATE_LEN = 100

# Physiologically plausible peak-to-peak gap for a single beat, seconds.
BEAT_GAP_MIN_S = 0.3
BEAT_GAP_MAX_S = 2.0


@dataclass(frozen=True)
class PpgSegment:
    """One fixed-rate waveform window."""

    samples: np.ndarray
    fs_hz: float

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        object.__setattr__(self, "samples", samples)
        if samples.ndim != 1 or samples.size < 2:
            raise ValueError("segment needs at least 2 samples")
        if not np.all(np.isfinite(samples)):
            raise ValueError("segment contains non-finite samples")
        if not (self.fs_hz > 0):
            raise ValueError("fs_hz must be positive")

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.fs_hz


@dataclass(frozen=True)
class PeakSet:
    """Detected peak indices with their topographic prominences."""

    indices: np.ndarray
    prominences: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        prom = np.asarray(self.prominences, dtype=np.float64)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "prominences", prom)
        if idx.size != prom.size:
            raise ValueError("indices and prominences must align")
        if idx.size > 1 and np.any(np.diff(idx) <= 0):
            raise ValueError("peak indices must be strictly increasing")
        if np.any(prom < 0):
            raise ValueError("prominences must be non-negative")

    def __len__(self) -> int:
        return self.indices.size


@dataclass(frozen=True)
class BeatTemplate:
    """Average peak-to-peak beat, resampled to a fixed length."""

    samples: np.ndarray
    n_beats_averaged: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        object.__setattr__(self, "samples", samples)
        if samples.size != TEMPLATE_LEN:
            raise ValueError(f"template must have {TEMPLATE_LEN} samples")
        if not np.all(np.isfinite(samples)):
            raise ValueError("template contains non-finite values")
        if self.n_beats_averaged < 1:
            raise ValueError("n_beats_averaged must be positive")


def resample_fourier(seg: PpgSegment, target_len: int) -> PpgSegment:
    """Resample by spectrum truncation / zero-padding about DC.

    When downsampling to an even length the surviving Nyquist bin receives
    both conjugate source bins; when upsampling from an even length the
    source Nyquist bin is split evenly between the two target bins.  Both
    choices keep the output real.  Amplitudes are scaled by
    target_len/original_len so band-limited inputs are value-preserving at
    shared sample instants.
    """
    if target_len < 2:
        raise ValueError("target_len must be >= 2")
    x = seg.samples
    n = x.size
    m = int(target_len)
    spectrum = np.fft.fft(x)
    out = np.zeros(m, dtype=complex)
    half = min(n, m)
    kmax = (half - 1) // 2  # positive frequencies strictly below Nyquist
    out[: kmax + 1] = spectrum[: kmax + 1]
    if kmax > 0:
        out[-kmax:] = spectrum[-kmax:]
    if half % 2 == 0:
        ny = half // 2
        if m < n:
            out[ny] = spectrum[ny] + spectrum[n - ny]
        elif m > n:
            out[ny] = 0.5 * spectrum[ny]
            out[m - ny] = 0.5 * spectrum[ny]
        else:
            out[ny] = spectrum[ny]
    y = np.fft.ifft(out).real * (m / n)
    return PpgSegment(samples=y, fs_hz=seg.fs_hz * m / n)


def zscore(seg: PpgSegment) -> PpgSegment:
    """Normalize to mean 0 and population (divisor-N) std 1."""
    x = seg.samples
    mu = float(np.mean(x))
    sd = float(np.std(x))
    if sd == 0.0:
        raise FlatSegmentError("zero-variance segment cannot be z-scored")
    return PpgSegment(samples=(x - mu) / sd, fs_hz=seg.fs_hz)


def _local_maxima(x: np.ndarray) -> list[int]:
    """Interior strict-or-plateau local maxima; a plateau counts once, at its
    leftmost sample."""
    n = x.size
    maxima = []
    i = 1
    while i < n - 1:
        if x[i] > x[i - 1]:
            # scan over a potential plateau
            j = i
            while j + 1 < n and x[j + 1] == x[i]:
                j += 1
            if j < n - 1 and x[j + 1] < x[i]:
                maxima.append(i)
            i = j + 1
        else:
            i += 1
    return maxima


def _prominence(x: np.ndarray, peak: int) -> float:
    """Topographic prominence: height above the higher of the two lowest
    valleys separating the peak from strictly higher terrain (or the signal
    edge)."""
    h = x[peak]
    left_min = h
    i = peak - 1
    while i >= 0 and x[i] <= h:
        if x[i] < left_min:
            left_min = x[i]
        i -= 1
    right_min = h
    i = peak + 1
    n = x.size
    while i < n and x[i] <= h:
        if x[i] < right_min:
            right_min = x[i]
        i += 1
    return float(h - max(left_min, right_min))


def detect_systolic_peaks(
    seg: PpgSegment,
    min_distance_s: float = 0.4,
    min_prominence: float = 0.1,
) -> PeakSet:
    """Find prominent local maxima, thinned to a minimum inter-peak distance.

    Candidates are interior strict-or-plateau maxima whose prominence is at
    least ``min_prominence``.  Thinning greedily keeps higher-amplitude peaks
    first (ties towards the lower index) and rejects any candidate within
    ``round(min_distance_s * fs_hz)`` samples of an accepted peak.  Expects a
    z-scored segment so the prominence threshold is in SD units.
    """
    x = seg.samples
    min_gap = int(round(min_distance_s * seg.fs_hz))
    candidates = []
    for idx in _local_maxima(x):
        prom = _prominence(x, idx)
        if prom >= min_prominence:
            candidates.append((idx, prom))
    # Greedy thinning: descending amplitude, ascending index on ties.
    order = sorted(candidates, key=lambda c: (-x[c[0]], c[0]))
    accepted: list[tuple[int, float]] = []
    for idx, prom in order:
        if all(abs(idx - a) >= min_gap for a, _ in accepted):
            accepted.append((idx, prom))
    accepted.sort(key=lambda c: c[0])
    return PeakSet(
        indices=np.array([a for a, _ in accepted], dtype=np.int64),
        prominences=np.array([p for _, p in accepted], dtype=np.float64),
    )


def extract_beat_template(seg: PpgSegment, peaks: PeakSet) -> BeatTemplate:
    """Average all plausible peak-to-peak beats, each Fourier-resampled to
    the fixed template length.

    A beat is an index slice [p_i, p_{i+1}) whose duration lies in
    [0.3 s, 2.0 s].
    """
    if len(peaks) < 2:
        raise NoValidBeatsError("need at least 2 peaks to isolate a beat")
    fs = seg.fs_hz
    beats = []
    idx = peaks.indices
    for a, b in zip(idx[:-1], idx[1:]):
        gap_s = (b - a) / fs
        if BEAT_GAP_MIN_S <= gap_s <= BEAT_GAP_MAX_S:
            beat = PpgSegment(samples=seg.samples[a:b], fs_hz=fs)
            beats.append(resample_fourier(beat, TEMPLATE_LEN).samples)
    if not beats:
        raise NoValidBeatsError("no peak-to-peak gap in the plausible range")
    template = np.mean(np.stack(beats), axis=0)
    return BeatTemplate(samples=template, n_beats_averaged=len(beats))
